#include "graphmdn/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graphmdn/errors.hpp"

namespace graphmdn {

void AdamState::init(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
}

void adam_step(AdamState& state, std::vector<double>& params, std::span<const double> grads,
               double lr) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size()) {
        throw ShapeError("adam_step: length mismatch");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

std::uint64_t LrSchedule::peak_step() const {
    if (total_steps <= 1) return 0;
    return static_cast<std::uint64_t>(
        std::llround(pct_up * static_cast<double>(total_steps - 1)));
}

double lr_at(const LrSchedule& schedule, std::uint64_t step) {
    if (step >= schedule.total_steps) {
        throw std::domain_error("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(schedule.total_steps) + ")");
    }
    if (schedule.kind == LrSchedule::Kind::kExponential) {
        const std::uint64_t epoch = step / std::max<std::uint64_t>(1, schedule.steps_per_epoch);
        return schedule.initial_lr * std::pow(schedule.decay, static_cast<double>(epoch));
    }

    const std::uint64_t up = schedule.peak_step();
    const std::uint64_t last = schedule.total_steps - 1;
    const double low = schedule.peak_lr / schedule.div_factor;
    const double end = schedule.peak_lr / schedule.final_div;
    if (step == up) return schedule.peak_lr; // the peak is attained exactly
    if (step < up) {
        const double u = static_cast<double>(step) / static_cast<double>(up);
        return low + (schedule.peak_lr - low) * 0.5 * (1.0 - std::cos(M_PI * u));
    }
    if (step == last) return end;
    const double u = static_cast<double>(step - up) / static_cast<double>(last - up);
    return end + (schedule.peak_lr - end) * 0.5 * (1.0 + std::cos(M_PI * u));
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
    if (!(peak_lr > 0.0) || !(initial_lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (!(div_factor > 0.0) || !(final_div > 0.0)) throw ConfigError("divisors must be > 0");
    if (pct_up < 0.0 || pct_up > 1.0) throw ConfigError("pct_up must be in [0, 1]");
    if (!(decay > 0.0)) throw ConfigError("decay must be > 0");
    backbone().validate();
}

BackboneConfig TrainConfig::backbone() const {
    return BackboneConfig{blocks, hidden_dim, kernels, dropout};
}

LrSchedule TrainConfig::schedule(std::size_t train_samples) const {
    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, (train_samples + batch_size - 1) / batch_size);
    LrSchedule s;
    s.kind = schedule_kind;
    s.total_steps = static_cast<std::uint64_t>(steps_per_epoch) * epochs;
    s.peak_lr = peak_lr;
    s.pct_up = pct_up;
    s.div_factor = div_factor;
    s.final_div = final_div;
    s.initial_lr = initial_lr;
    s.decay = decay;
    s.steps_per_epoch = steps_per_epoch;
    return s;
}

namespace {

using nlohmann::json;

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
        if (!known) throw ConfigError(origin + ": unknown key '" + item.key() + "'");
    }
}

} // namespace

TrainConfig TrainConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    reject_unknown_keys(j,
                        {"seed", "batch_size", "epochs", "kernels", "dropout", "loss", "blocks",
                         "hidden_dim", "grad_clip", "mixture_warmup_steps", "schedule"},
                        origin);
    TrainConfig cfg;
    try {
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("kernels")) cfg.kernels = j["kernels"].get<std::size_t>();
        if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
        if (j.contains("blocks")) cfg.blocks = j["blocks"].get<std::size_t>();
        if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<std::size_t>();
        if (j.contains("grad_clip")) cfg.grad_clip = j["grad_clip"].get<double>();
        if (j.contains("mixture_warmup_steps")) {
            cfg.mixture_warmup_steps = j["mixture_warmup_steps"].get<std::size_t>();
        }
        if (j.contains("loss")) {
            const std::string mode = j["loss"].get<std::string>();
            if (mode == "node") {
                cfg.loss_mode = LossMode::kNode;
            } else if (mode == "pose") {
                cfg.loss_mode = LossMode::kPose;
            } else {
                throw ConfigError(origin + ": loss must be 'node' or 'pose'");
            }
        }
        if (j.contains("schedule")) {
            const json& s = j["schedule"];
            if (!s.is_object()) throw ConfigError(origin + ": schedule must be an object");
            const std::string kind = s.value("kind", "one_cycle");
            if (kind == "one_cycle") {
                reject_unknown_keys(s, {"kind", "peak_lr", "pct_up", "div_factor", "final_div"},
                                    origin + ".schedule");
                cfg.schedule_kind = LrSchedule::Kind::kOneCycle;
                if (s.contains("peak_lr")) cfg.peak_lr = s["peak_lr"].get<double>();
                if (s.contains("pct_up")) cfg.pct_up = s["pct_up"].get<double>();
                if (s.contains("div_factor")) cfg.div_factor = s["div_factor"].get<double>();
                if (s.contains("final_div")) cfg.final_div = s["final_div"].get<double>();
            } else if (kind == "exponential") {
                reject_unknown_keys(s, {"kind", "initial_lr", "decay"}, origin + ".schedule");
                cfg.schedule_kind = LrSchedule::Kind::kExponential;
                if (s.contains("initial_lr")) cfg.initial_lr = s["initial_lr"].get<double>();
                if (s.contains("decay")) cfg.decay = s["decay"].get<double>();
            } else {
                throw ConfigError(origin + ": schedule.kind must be 'one_cycle' or 'exponential'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

std::string TrainConfig::to_json_text() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["kernels"] = kernels;
    j["dropout"] = dropout;
    j["loss"] = loss_mode == LossMode::kNode ? "node" : "pose";
    j["blocks"] = blocks;
    j["hidden_dim"] = hidden_dim;
    j["grad_clip"] = grad_clip;
    j["mixture_warmup_steps"] = mixture_warmup_steps;
    nlohmann::ordered_json s;
    if (schedule_kind == LrSchedule::Kind::kOneCycle) {
        s["kind"] = "one_cycle";
        s["peak_lr"] = peak_lr;
        s["pct_up"] = pct_up;
        s["div_factor"] = div_factor;
        s["final_div"] = final_div;
    } else {
        s["kind"] = "exponential";
        s["initial_lr"] = initial_lr;
        s["decay"] = decay;
    }
    j["schedule"] = std::move(s);
    return j.dump();
}

namespace {

struct BatchTensors {
    Matrix x; // (n*K) x 2
    Matrix y; // n x 3K
    int n = 0;
};

BatchTensors build_batch(std::span<const SampleRecord> records,
                         std::span<const std::size_t> indices, std::size_t k) {
    BatchTensors batch;
    batch.n = static_cast<int>(indices.size());
    batch.x = Matrix(indices.size() * k, 2);
    batch.y = Matrix(indices.size(), 3 * k);
    for (std::size_t s = 0; s < indices.size(); ++s) {
        const SampleRecord& rec = records[indices[s]];
        if (rec.input2d.size() != 2 * k || rec.target3d.size() != 3 * k) {
            throw ShapeError("build_batch: record '" + rec.id + "' does not match K=" +
                             std::to_string(k));
        }
        for (std::size_t i = 0; i < k; ++i) {
            batch.x(s * k + i, 0) = rec.input2d[2 * i];
            batch.x(s * k + i, 1) = rec.input2d[2 * i + 1];
        }
        std::copy(rec.target3d.begin(), rec.target3d.end(), batch.y.row(s));
    }
    return batch;
}

} // namespace

double clip_gradient_norm(std::vector<double>& grads, double max_norm) {
    double acc = 0.0;
    for (double v : grads) acc += v * v;
    const double norm = std::sqrt(acc);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grads) g *= s;
    }
    return norm;
}

FitResult fit(GraphMdnModel& model, TrainerState& state, const TrainConfig& config,
              std::span<const SampleRecord> train, const std::string& checkpoint_path,
              const std::string& skeleton_hash, std::size_t stop_after_epoch) {
    config.validate();
    if (train.empty()) throw DataError("fit: training set is empty");
    if (state.adam.m.size() != model.param_values().size()) {
        throw ShapeError("fit: optimizer state does not match model parameters");
    }

    const std::size_t k = model.node_count();
    const LrSchedule schedule = config.schedule(train.size());
    const Rng base(config.seed);

    FitResult result;
    const std::size_t last_epoch = std::min(config.epochs, stop_after_epoch);
    for (std::size_t epoch = state.epochs_done; epoch < last_epoch; ++epoch) {
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = base.stream(rng_streams::kShuffle).stream(epoch);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            BatchTensors batch = build_batch(
                train, std::span<const std::size_t>(order.data() + start, end - start), k);

            const double lr = lr_at(schedule, state.global_step);
            Rng dropout_rng = base.stream(rng_streams::kDropout).stream(state.global_step);
            Matrix logits = model.forward(batch.x, batch.n, /*training=*/true, &dropout_rng);

            Matrix dlogits;
            double loss;
            const double resp_blend =
                state.global_step < config.mixture_warmup_steps
                    ? 1.0 - static_cast<double>(state.global_step) /
                                static_cast<double>(config.mixture_warmup_steps)
                    : 0.0;
            try {
                loss = mixture_batch_nll(logits, batch.n, k, config.kernels, batch.y,
                                         config.loss_mode, &dlogits, resp_blend);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " [epoch " + std::to_string(epoch) +
                                   ", batch at sample " + std::to_string(start) + "]");
            }
            if (!std::isfinite(loss)) {
                std::size_t worst = 0;
                for (std::size_t i = 0; i < model.param_values().size(); ++i) {
                    if (std::abs(model.param_values()[i]) >
                        std::abs(model.param_values()[worst])) {
                        worst = i;
                    }
                }
                throw NumericError("fit: non-finite loss [epoch " + std::to_string(epoch) +
                                   ", batch at sample " + std::to_string(start) +
                                   ", largest parameter " + model.param_name(worst) + "]");
            }

            std::vector<double> grads = model.backward(dlogits);
            clip_gradient_norm(grads, config.grad_clip);
            adam_step(state.adam, model.param_values(), grads, lr);

            result.log.push_back({state.global_step, epoch, lr, loss});
            epoch_loss += loss;
            ++epoch_steps;
            ++state.global_step;
        }
        state.epochs_done = epoch + 1;
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_steps));

        if (!checkpoint_path.empty()) {
            save_checkpoint(checkpoint_path,
                            make_checkpoint(model, state, config, skeleton_hash));
        }
    }
    return result;
}

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> rows) {
    out << "step,epoch,lr,loss\n";
    char buf[128];
    for (const TrainLogRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%llu,%zu,%.17g,%.17g\n",
                      static_cast<unsigned long long>(row.step), row.epoch, row.lr, row.loss);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'G', 'M', 'D', 'N'};
constexpr std::uint32_t kVersion = 1;

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t n, const std::string& path) {
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("checkpoint truncated: " + path);
    return v;
}

} // namespace

Checkpoint make_checkpoint(const GraphMdnModel& model, const TrainerState& state,
                           const TrainConfig& config, const std::string& skeleton_hash) {
    Checkpoint ckpt;
    ckpt.config = config;
    ckpt.skeleton_hash = skeleton_hash;
    ckpt.params = model.param_values();
    ckpt.aux = model.aux_values();
    ckpt.adam_m = state.adam.m;
    ckpt.adam_v = state.adam.v;
    ckpt.adam_step = state.adam.step;
    ckpt.global_step = state.global_step;
    ckpt.epochs_done = state.epochs_done;
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::ordered_json header;
    header["config"] = nlohmann::json::parse(ckpt.config.to_json_text());
    header["skeleton_hash"] = ckpt.skeleton_hash;
    header["param_count"] = ckpt.params.size();
    header["aux_count"] = ckpt.aux.size();
    header["adam_step"] = ckpt.adam_step;
    header["global_step"] = ckpt.global_step;
    header["epochs_done"] = ckpt.epochs_done;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    write_doubles(out, ckpt.params);
    write_doubles(out, ckpt.aux);
    write_doubles(out, ckpt.adam_m);
    write_doubles(out, ckpt.adam_v);
    if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("not a checkpoint file: " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion) {
        throw DataError("unsupported checkpoint version in " + path);
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw DataError("checkpoint truncated: " + path);
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint truncated: " + path);

    Checkpoint ckpt;
    try {
        const nlohmann::json header = nlohmann::json::parse(header_text);
        ckpt.config = TrainConfig::from_json_text(header.at("config").dump(), path + " (config)");
        ckpt.skeleton_hash = header.at("skeleton_hash").get<std::string>();
        ckpt.adam_step = header.at("adam_step").get<std::uint64_t>();
        ckpt.global_step = header.at("global_step").get<std::uint64_t>();
        ckpt.epochs_done = header.at("epochs_done").get<std::size_t>();
        const std::size_t param_count = header.at("param_count").get<std::size_t>();
        const std::size_t aux_count = header.at("aux_count").get<std::size_t>();
        ckpt.params = read_doubles(in, param_count, path);
        ckpt.aux = read_doubles(in, aux_count, path);
        ckpt.adam_m = read_doubles(in, param_count, path);
        ckpt.adam_v = read_doubles(in, param_count, path);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad checkpoint header in " + path + ": " + e.what());
    }
    return ckpt;
}

GraphMdnModel model_from_checkpoint(const Checkpoint& ckpt, const SkeletonGraph& graph) {
    if (!ckpt.skeleton_hash.empty() && ckpt.skeleton_hash != graph.hash()) {
        throw DataError("checkpoint skeleton hash " + ckpt.skeleton_hash +
                        " does not match graph " + graph.hash());
    }
    GraphMdnModel model(graph, ckpt.config.backbone());
    if (model.param_values().size() != ckpt.params.size() ||
        model.aux_values().size() != ckpt.aux.size()) {
        throw DataError("checkpoint tensor sizes do not match its config");
    }
    model.param_values() = ckpt.params;
    model.aux_values() = ckpt.aux;
    return model;
}

void restore_trainer_state(const Checkpoint& ckpt, TrainerState& state) {
    state.adam.m = ckpt.adam_m;
    state.adam.v = ckpt.adam_v;
    state.adam.step = ckpt.adam_step;
    state.global_step = ckpt.global_step;
    state.epochs_done = ckpt.epochs_done;
}

} // namespace graphmdn
