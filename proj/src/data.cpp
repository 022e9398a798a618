#include "graphmdn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graphmdn/errors.hpp"
#include "graphmdn/rng.hpp"

namespace graphmdn {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& origin) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw DataError(origin + ": unknown key '" + item.key() + "'");
    }
}

} // namespace

// ---------------------------------------------------------------------------
// SynthSpec

SynthSpec SynthSpec::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw DataError(origin + ": generator spec must be a JSON object");
    reject_unknown_keys(j, {"kind", "count", "noise", "ambiguous_limbs", "seed"}, origin);
    SynthSpec spec;
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "bimodal-1d") {
            spec.kind = Kind::kBimodal1D;
        } else if (kind == "mirror-skeleton") {
            spec.kind = Kind::kMirrorSkeleton;
        } else {
            throw DataError(origin + ": kind must be 'bimodal-1d' or 'mirror-skeleton'");
        }
        if (j.contains("count")) spec.count = j["count"].get<std::size_t>();
        if (j.contains("noise")) spec.noise = j["noise"].get<double>();
        if (j.contains("ambiguous_limbs"))
            spec.ambiguous_limbs = j["ambiguous_limbs"].get<std::size_t>();
        if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError(origin + ": " + e.what());
    }
    if (spec.count < 1) throw DataError(origin + ": count must be >= 1");
    if (spec.noise < 0.0) throw DataError(origin + ": noise must be >= 0");
    if (spec.ambiguous_limbs > mirror_limbs().size()) {
        throw DataError(origin + ": ambiguous_limbs must be <= " +
                        std::to_string(mirror_limbs().size()));
    }
    return spec;
}

SynthSpec SynthSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open generator spec: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

std::string SynthSpec::to_json_text() const {
    nlohmann::ordered_json j;
    j["kind"] = kind == Kind::kBimodal1D ? "bimodal-1d" : "mirror-skeleton";
    j["count"] = count;
    j["noise"] = noise;
    j["ambiguous_limbs"] = ambiguous_limbs;
    j["seed"] = seed;
    return j.dump();
}

// ---------------------------------------------------------------------------
// Dataset container

bool Dataset::is_train_subject(const std::string& subject) const {
    return std::find(manifest.train_subjects.begin(), manifest.train_subjects.end(), subject) !=
           manifest.train_subjects.end();
}

std::vector<SampleRecord> Dataset::train_split() const {
    std::vector<SampleRecord> out;
    for (const SampleRecord& rec : records) {
        if (is_train_subject(rec.subject)) out.push_back(rec);
    }
    return out;
}

std::vector<SampleRecord> Dataset::test_split() const {
    std::vector<SampleRecord> out;
    for (const SampleRecord& rec : records) {
        if (!is_train_subject(rec.subject)) out.push_back(rec);
    }
    return out;
}

namespace {

json manifest_to_json(const Dataset& dataset) {
    nlohmann::ordered_json j;
    j["format"] = "graphmdn-dataset";
    j["version"] = 1;
    j["skeleton_hash"] = dataset.manifest.skeleton_hash;
    nlohmann::ordered_json graph;
    graph["nodes"] = dataset.graph.node_count();
    graph["names"] = dataset.graph.node_names();
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [a, b] : dataset.graph.edges()) {
        edges.push_back(nlohmann::ordered_json::array({a, b}));
    }
    graph["edges"] = std::move(edges);
    j["graph"] = std::move(graph);
    j["sample_count"] = dataset.manifest.sample_count;
    nlohmann::ordered_json norm;
    norm["offset2d"] = dataset.manifest.offset2d;
    norm["scale2d"] = dataset.manifest.scale2d;
    norm["scale3d_mm"] = dataset.manifest.scale3d_mm;
    j["norm"] = std::move(norm);
    nlohmann::ordered_json splits;
    splits["train"] = dataset.manifest.train_subjects;
    splits["test"] = dataset.manifest.test_subjects;
    j["splits"] = std::move(splits);
    if (dataset.manifest.generator) {
        j["generator"] = json::parse(dataset.manifest.generator->to_json_text());
    }
    return j;
}

} // namespace

void save_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << manifest_to_json(dataset).dump() << "\n";
    for (const SampleRecord& rec : dataset.records) {
        nlohmann::ordered_json j;
        j["id"] = rec.id;
        j["subject"] = rec.subject;
        j["action"] = rec.action;
        j["camera"] = rec.camera;
        j["input2d"] = rec.input2d;
        j["target3d"] = rec.target3d;
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line) || line.empty()) {
        throw DataError(path + ": missing manifest header line");
    }

    json mj;
    try {
        mj = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(path + ":1: " + e.what());
    }

    DatasetManifest manifest;
    std::unique_ptr<SkeletonGraph> graph;
    try {
        if (mj.at("format").get<std::string>() != "graphmdn-dataset") {
            throw DataError(path + ": not a graphmdn dataset");
        }
        if (mj.at("version").get<int>() != 1) {
            throw DataError(path + ": unsupported dataset version");
        }
        manifest.skeleton_hash = mj.at("skeleton_hash").get<std::string>();
        const json& gj = mj.at("graph");
        const std::size_t nodes = gj.at("nodes").get<std::size_t>();
        std::vector<std::string> names;
        if (gj.contains("names")) names = gj["names"].get<std::vector<std::string>>();
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : gj.at("edges")) {
            edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        }
        graph = std::make_unique<SkeletonGraph>(nodes, std::move(edges), std::move(names));
        manifest.sample_count = mj.at("sample_count").get<std::size_t>();
        const json& norm = mj.at("norm");
        manifest.offset2d = {norm.at("offset2d").at(0).get<double>(),
                             norm.at("offset2d").at(1).get<double>()};
        manifest.scale2d = norm.at("scale2d").get<double>();
        manifest.scale3d_mm = norm.at("scale3d_mm").get<double>();
        if (!(manifest.scale2d > 0.0) || !(manifest.scale3d_mm > 0.0)) {
            throw DataError(path + ": normalization scales must be positive");
        }
        manifest.train_subjects = mj.at("splits").at("train").get<std::vector<std::string>>();
        manifest.test_subjects = mj.at("splits").at("test").get<std::vector<std::string>>();
        if (mj.contains("generator")) {
            manifest.generator =
                SynthSpec::from_json_text(mj["generator"].dump(), path + " (generator)");
        }
    } catch (const json::exception& e) {
        throw DataError(path + ":1: " + e.what());
    }

    if (manifest.skeleton_hash != graph->hash()) {
        throw DataError(path + ": skeleton hash " + manifest.skeleton_hash +
                        " does not match embedded graph " + graph->hash());
    }

    const std::size_t k = graph->node_count();
    std::vector<SampleRecord> records;
    std::set<std::string> ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rj;
        try {
            rj = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        SampleRecord rec;
        try {
            rec.id = rj.at("id").get<std::string>();
            rec.subject = rj.at("subject").get<std::string>();
            rec.action = rj.at("action").get<std::string>();
            rec.camera = rj.at("camera").get<std::string>();
            rec.input2d = rj.at("input2d").get<std::vector<double>>();
            rec.target3d = rj.at("target3d").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (rec.input2d.size() != 2 * k || rec.target3d.size() != 3 * k) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": pose lengths do not match the " + std::to_string(k) +
                            "-node graph");
        }
        for (double v : rec.input2d) {
            if (!std::isfinite(v)) {
                throw DataError(path + ":" + std::to_string(line_no) + ": non-finite input2d");
            }
        }
        for (double v : rec.target3d) {
            if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-12) {
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": target3d outside [-1,1]");
            }
        }
        if (!ids.insert(rec.id).second) {
            throw DataError(path + ":" + std::to_string(line_no) + ": duplicate id '" + rec.id +
                            "'");
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw DataError(path + ": dataset has no records");
    if (records.size() != manifest.sample_count) {
        throw DataError(path + ": manifest declares " + std::to_string(manifest.sample_count) +
                        " samples but " + std::to_string(records.size()) + " were found");
    }
    return Dataset{std::move(manifest), std::move(*graph), std::move(records)};
}

// ---------------------------------------------------------------------------
// Normalization

DatasetManifest fit_manifest(std::span<const RawSample> corpus, const SkeletonGraph& graph) {
    if (corpus.empty()) throw DataError("fit_manifest: empty corpus");
    const std::size_t k = graph.node_count();

    double max3d = 0.0;
    double sum2d[2] = {0.0, 0.0};
    std::size_t count2d = 0;
    for (const RawSample& raw : corpus) {
        if (raw.joints3d.rows() != k + 1 || raw.joints3d.cols() != 3 ||
            raw.joints2d.rows() != k + 1 || raw.joints2d.cols() != 2) {
            throw ShapeError("fit_manifest: raw sample '" + raw.id + "' has wrong joint counts");
        }
        for (std::size_t i = 1; i <= k; ++i) {
            for (int c = 0; c < 3; ++c) {
                max3d = std::max(max3d, std::abs(raw.joints3d(i, c) - raw.joints3d(0, c)));
            }
            for (int c = 0; c < 2; ++c) {
                sum2d[c] += raw.joints2d(i, c);
            }
            ++count2d;
        }
    }
    if (!(max3d > 0.0)) throw DataError("fit_manifest: corpus has zero 3D extent");

    DatasetManifest manifest;
    manifest.scale3d_mm = max3d;
    manifest.offset2d = {sum2d[0] / static_cast<double>(count2d),
                         sum2d[1] / static_cast<double>(count2d)};
    double max2d = 0.0;
    for (const RawSample& raw : corpus) {
        for (std::size_t i = 1; i <= k; ++i) {
            for (int c = 0; c < 2; ++c) {
                max2d = std::max(max2d, std::abs(raw.joints2d(i, c) - manifest.offset2d[c]));
            }
        }
    }
    if (!(max2d > 0.0)) throw DataError("fit_manifest: corpus has zero 2D extent");
    manifest.scale2d = max2d;
    manifest.skeleton_hash = graph.hash();
    manifest.sample_count = corpus.size();
    return manifest;
}

SampleRecord normalize(const RawSample& raw, const DatasetManifest& manifest) {
    const std::size_t k = raw.joints3d.rows() - 1;
    if (raw.joints3d.rows() < 2 || raw.joints3d.cols() != 3 || raw.joints2d.rows() != k + 1 ||
        raw.joints2d.cols() != 2) {
        throw ShapeError("normalize: raw sample '" + raw.id + "' has wrong joint counts");
    }
    double extent = 0.0;
    for (std::size_t i = 1; i <= k; ++i) {
        for (int c = 0; c < 3; ++c) {
            extent = std::max(extent, std::abs(raw.joints3d(i, c) - raw.joints3d(0, c)));
        }
    }
    if (!(extent > 0.0)) throw DataError("normalize: zero-extent pose '" + raw.id + "'");

    SampleRecord rec;
    rec.id = raw.id;
    rec.subject = raw.subject;
    rec.action = raw.action;
    rec.camera = raw.camera;
    rec.input2d.resize(2 * k);
    rec.target3d.resize(3 * k);
    for (std::size_t i = 1; i <= k; ++i) {
        for (int c = 0; c < 2; ++c) {
            rec.input2d[2 * (i - 1) + c] =
                (raw.joints2d(i, c) - manifest.offset2d[c]) / manifest.scale2d;
        }
        for (int c = 0; c < 3; ++c) {
            rec.target3d[3 * (i - 1) + c] =
                (raw.joints3d(i, c) - raw.joints3d(0, c)) / manifest.scale3d_mm;
        }
    }
    for (double v : rec.input2d) {
        if (!std::isfinite(v)) throw NumericError("normalize: non-finite 2D in '" + raw.id + "'");
    }
    return rec;
}

std::vector<double> denormalize_target(std::span<const double> target3d,
                                       const DatasetManifest& manifest) {
    std::vector<double> out(target3d.begin(), target3d.end());
    for (double& v : out) v *= manifest.scale3d_mm;
    return out;
}

std::vector<double> denormalize_input(std::span<const double> input2d,
                                      const DatasetManifest& manifest) {
    std::vector<double> out(input2d.begin(), input2d.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = out[i] * manifest.scale2d + manifest.offset2d[i % 2];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mirror-skeleton generator

namespace {

// Rest pose in millimeters, root-relative, y up, matching human_skeleton()
// node order.
constexpr double kRestPose[16][2] = {
    {-130, 0},   // rhip
    {-130, -450}, // rknee
    {-130, -900}, // rfoot
    {130, 0},    // lhip
    {130, -450}, // lknee
    {130, -900}, // lfoot
    {0, 250},    // spine
    {0, 500},    // thorax
    {0, 600},    // neck
    {0, 720},    // head
    {180, 500},  // lshoulder
    {260, 240},  // lelbow
    {300, 0},    // lwrist
    {-180, 500}, // rshoulder
    {-260, 240}, // relbow
    {-300, 0},   // rwrist
};

constexpr double kProximalDepthMm = 220.0;
constexpr double kDistalDepthMm = 360.0;
constexpr double kJitterMm = 60.0;

std::string subject_for_index(std::size_t i, const DatasetManifest& manifest) {
    // 10:1 train/test interleave
    if (i % 11 < 10) {
        return manifest.train_subjects[i % manifest.train_subjects.size()];
    }
    return manifest.test_subjects[i % manifest.test_subjects.size()];
}

} // namespace

const std::vector<std::vector<std::size_t>>& mirror_limbs() {
    static const std::vector<std::vector<std::size_t>> limbs = {
        {11, 12}, // left arm: elbow, wrist
        {14, 15}, // right arm
        {4, 5},   // left leg: knee, foot
        {1, 2},   // right leg
    };
    return limbs;
}

double mirror_depth_mm(std::size_t joint) {
    for (const auto& limb : mirror_limbs()) {
        if (joint == limb[0]) return kProximalDepthMm;
        if (joint == limb[1]) return kDistalDepthMm;
    }
    return 0.0;
}

namespace {

Dataset synth_mirror(const SynthSpec& spec) {
    const SkeletonGraph& graph = human_skeleton();
    const std::size_t k = graph.node_count();
    const auto& limbs = mirror_limbs();

    Dataset dataset{DatasetManifest{}, graph, {}};
    dataset.manifest.generator = spec;

    Rng rng = Rng(spec.seed).stream(rng_streams::kGenerator);

    // pass 1: joint positions
    std::vector<Matrix> poses;
    poses.reserve(spec.count);
    double max_abs = 0.0;
    for (std::size_t s = 0; s < spec.count; ++s) {
        Matrix pose(k, 3);
        for (std::size_t i = 0; i < k; ++i) {
            pose(i, 0) = kRestPose[i][0] + rng.uniform(-kJitterMm, kJitterMm);
            pose(i, 1) = kRestPose[i][1] + rng.uniform(-kJitterMm, kJitterMm);
            pose(i, 2) = 0.0;
        }
        for (std::size_t l = 0; l < spec.ambiguous_limbs; ++l) {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            for (std::size_t joint : limbs[l]) {
                pose(joint, 2) = sign * mirror_depth_mm(joint);
            }
        }
        for (std::size_t i = 0; i < pose.size(); ++i) {
            max_abs = std::max(max_abs, std::abs(pose.data()[i]));
        }
        poses.push_back(std::move(pose));
    }

    dataset.manifest.scale3d_mm = max_abs;
    dataset.manifest.scale2d = max_abs; // shared scale: 2D is the orthographic xy
    dataset.manifest.offset2d = {0.0, 0.0};
    dataset.manifest.skeleton_hash = graph.hash();
    dataset.manifest.sample_count = spec.count;

    // pass 2: normalized records, input noise drawn after normalization
    char idbuf[32];
    for (std::size_t s = 0; s < spec.count; ++s) {
        SampleRecord rec;
        std::snprintf(idbuf, sizeof(idbuf), "mir%06zu", s);
        rec.id = idbuf;
        rec.subject = subject_for_index(s, dataset.manifest);
        rec.action = "mirror";
        rec.camera = "c0";
        rec.input2d.resize(2 * k);
        rec.target3d.resize(3 * k);
        const Matrix& pose = poses[s];
        for (std::size_t i = 0; i < k; ++i) {
            for (int c = 0; c < 3; ++c) rec.target3d[3 * i + c] = pose(i, c) / max_abs;
            for (int c = 0; c < 2; ++c) rec.input2d[2 * i + c] = pose(i, c) / max_abs;
        }
        if (spec.noise > 0.0) {
            for (double& v : rec.input2d) v += spec.noise * rng.normal();
        }
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

// ---------------------------------------------------------------------------
// Bimodal 1-D generator

constexpr double kBimodalUnitMm = 1000.0;

SkeletonGraph bimodal_graph() { return SkeletonGraph(2, {{0, 1}}, {"value", "anchor"}); }

Dataset synth_bimodal(const SynthSpec& spec) {
    Dataset dataset{DatasetManifest{}, bimodal_graph(), {}};
    dataset.manifest.generator = spec;

    Rng rng = Rng(spec.seed).stream(rng_streams::kGenerator);

    std::vector<double> ts(spec.count);
    double max_t = 0.0, max_x = 0.0;
    for (std::size_t s = 0; s < spec.count; ++s) {
        ts[s] = rng.uniform();
        max_t = std::max(max_t, std::abs(ts[s]));
        max_x = std::max(max_x, std::abs(bimodal_forward(ts[s])));
    }
    if (!(max_t > 0.0)) max_t = 1.0;

    dataset.manifest.scale3d_mm = kBimodalUnitMm * max_t;
    dataset.manifest.scale2d = kBimodalUnitMm * max_x;
    dataset.manifest.offset2d = {0.0, 0.0};
    dataset.manifest.skeleton_hash = dataset.graph.hash();
    dataset.manifest.sample_count = spec.count;

    char idbuf[32];
    for (std::size_t s = 0; s < spec.count; ++s) {
        SampleRecord rec;
        std::snprintf(idbuf, sizeof(idbuf), "bim%06zu", s);
        rec.id = idbuf;
        rec.subject = subject_for_index(s, dataset.manifest);
        rec.action = "bimodal";
        rec.camera = "c0";
        const double t = ts[s];
        const double x = bimodal_forward(t);
        rec.target3d = {kBimodalUnitMm * t / dataset.manifest.scale3d_mm, 0.0, 0.0,
                        0.0, 0.0, 0.0};
        rec.input2d = {kBimodalUnitMm * x / dataset.manifest.scale2d, 0.0, 0.0, 0.0};
        if (spec.noise > 0.0) rec.input2d[0] += spec.noise * rng.normal();
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

} // namespace

Dataset synth_dataset(const SynthSpec& spec) {
    return spec.kind == SynthSpec::Kind::kMirrorSkeleton ? synth_mirror(spec)
                                                         : synth_bimodal(spec);
}

// ---------------------------------------------------------------------------
// Oracles

double bimodal_forward(double t) { return t + 0.3 * std::sin(2.0 * M_PI * t); }

namespace {

double bisect_root(double lo, double hi, double x, double tol) {
    double flo = bimodal_forward(lo) - x;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = bimodal_forward(mid) - x;
        if ((flo <= 0.0) == (fmid <= 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

std::vector<double> bimodal_roots(double x, double tol) {
    std::vector<double> roots;
    constexpr int kGrid = 4096;
    double prev_t = 0.0;
    double prev_g = bimodal_forward(prev_t) - x;
    if (std::abs(prev_g) < 1e-13) roots.push_back(prev_t);
    for (int i = 1; i <= kGrid; ++i) {
        const double t = static_cast<double>(i) / kGrid;
        const double g = bimodal_forward(t) - x;
        if (std::abs(g) < 1e-13) {
            roots.push_back(t);
        } else if (std::abs(prev_g) >= 1e-13 && (prev_g < 0.0) != (g < 0.0)) {
            // a near-zero previous endpoint was already recorded as a root;
            // bisection needs a strict sign change
            roots.push_back(bisect_root(prev_t, t, x, tol));
        }
        prev_t = t;
        prev_g = g;
    }

    // tangency at the fold points: f'(t) = 1 + 0.6 pi cos(2 pi t) = 0
    const double cos_val = -1.0 / (0.6 * M_PI);
    const double tc = std::acos(cos_val) / (2.0 * M_PI);
    for (double t : {tc, 1.0 - tc}) {
        if (std::abs(bimodal_forward(t) - x) < 1e-10) roots.push_back(t);
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> unique;
    for (double t : roots) {
        if (unique.empty() || t - unique.back() > 1e-9) unique.push_back(t);
    }
    return unique;
}

std::vector<std::vector<double>> oracle_posterior(const SampleRecord& sample,
                                                  const SynthSpec& spec,
                                                  const DatasetManifest& manifest) {
    if (spec.kind == SynthSpec::Kind::kBimodal1D) {
        if (sample.action != "bimodal") {
            throw DataError("oracle_posterior: sample '" + sample.id +
                            "' was not produced by the bimodal generator");
        }
        const double x_unit = sample.input2d[0] * manifest.scale2d / kBimodalUnitMm;
        std::vector<std::vector<double>> out;
        for (double t : bimodal_roots(x_unit)) {
            out.push_back({kBimodalUnitMm * t / manifest.scale3d_mm, 0.0, 0.0, 0.0, 0.0, 0.0});
        }
        return out;
    }

    if (sample.action != "mirror") {
        throw DataError("oracle_posterior: sample '" + sample.id +
                        "' was not produced by the mirror generator");
    }
    const auto& limbs = mirror_limbs();
    const std::size_t l = spec.ambiguous_limbs;
    std::vector<std::vector<double>> out;
    out.reserve(std::size_t{1} << l);
    for (std::size_t mask = 0; mask < (std::size_t{1} << l); ++mask) {
        std::vector<double> pose = sample.target3d;
        for (std::size_t bit = 0; bit < l; ++bit) {
            if (mask & (std::size_t{1} << bit)) {
                for (std::size_t joint : limbs[bit]) pose[3 * joint + 2] *= -1.0;
            }
        }
        out.push_back(std::move(pose));
    }
    return out;
}

} // namespace graphmdn
