#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphmdn/graph.hpp"
#include "graphmdn/matrix.hpp"

namespace graphmdn {

/// One training example in normalized units. input2d is node-major
/// [x0,y0,x1,y1,...]; target3d is node-major root-relative [x0,y0,z0,...]
/// and always lies in [-1,1].
struct SampleRecord {
    std::string id;
    std::string subject;
    std::string action;
    std::string camera;
    std::vector<double> input2d;
    std::vector<double> target3d;
};

struct SynthSpec {
    enum class Kind { kBimodal1D, kMirrorSkeleton };
    Kind kind = Kind::kMirrorSkeleton;
    std::size_t count = 1000;
    double noise = 0.0;            // std of 2D jitter in normalized units
    std::size_t ambiguous_limbs = 2; // mirror generator only, 0..4
    std::uint64_t seed = 0;

    bool operator==(const SynthSpec&) const = default;

    static SynthSpec from_json_text(const std::string& text, const std::string& origin);
    static SynthSpec from_json_file(const std::string& path);
    std::string to_json_text() const;
};

/// Normalization metadata travels with the dataset so evaluation can report
/// millimeters without outside knowledge.
struct DatasetManifest {
    std::string skeleton_hash;
    std::size_t sample_count = 0;
    std::array<double, 2> offset2d{0.0, 0.0};
    double scale2d = 1.0;    // pixels (or mm) per normalized 2D unit
    double scale3d_mm = 1.0; // mm per normalized 3D unit
    std::vector<std::string> train_subjects{"S1", "S5", "S6", "S7", "S8"};
    std::vector<std::string> test_subjects{"S9", "S11"};
    std::optional<SynthSpec> generator;
};

struct Dataset {
    DatasetManifest manifest;
    SkeletonGraph graph;
    std::vector<SampleRecord> records;

    bool is_train_subject(const std::string& subject) const;
    std::vector<SampleRecord> train_split() const;
    std::vector<SampleRecord> test_split() const;
};

/// JSON-lines container: manifest header line, then one record per line.
/// Loading validates finiteness, the [-1,1] target range, id uniqueness and
/// the skeleton hash. An empty file is an error, not an empty dataset.
Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& dataset);

/// Raw (unnormalized) sample: K+1 joint rows with the root in row 0,
/// 2D in pixels, 3D in millimeters.
struct RawSample {
    std::string id;
    std::string subject;
    std::string action;
    std::string camera;
    Matrix joints2d; // (K+1) x 2
    Matrix joints3d; // (K+1) x 3
};

/// Corpus-wide normalization constants: 3D scale chosen so the largest
/// root-relative coordinate maps to exactly 1; 2D centered on the corpus
/// mean and scaled to the unit frame.
DatasetManifest fit_manifest(std::span<const RawSample> corpus, const SkeletonGraph& graph);

/// Root-relative 3D scaled to [-1,1], centered/scaled 2D, root dropped.
SampleRecord normalize(const RawSample& raw, const DatasetManifest& manifest);

/// Inverse maps back to root-relative millimeters / pixels.
std::vector<double> denormalize_target(std::span<const double> target3d,
                                       const DatasetManifest& manifest);
std::vector<double> denormalize_input(std::span<const double> input2d,
                                      const DatasetManifest& manifest);

/// Synthesizes a dataset from a generator spec. Deterministic: the same spec
/// yields byte-identical files.
Dataset synth_dataset(const SynthSpec& spec);

/// Exhaustive set of noise-free targets (normalized 3K vectors) consistent
/// with a synthetic sample's 2D input. Throws DataError when the sample does
/// not come from the given generator.
std::vector<std::vector<double>> oracle_posterior(const SampleRecord& sample,
                                                  const SynthSpec& spec,
                                                  const DatasetManifest& manifest);

/// The four mirrorable limbs (joint index lists) of the human skeleton, in
/// the fixed order the generator consumes them.
const std::vector<std::vector<std::size_t>>& mirror_limbs();

/// True depth magnitude (mm) assigned by the mirror generator to a joint,
/// 0 for non-limb joints.
double mirror_depth_mm(std::size_t joint);

/// Forward map of the bimodal toy: x = t + 0.3 sin(2 pi t).
double bimodal_forward(double t);

/// All t in [0,1] with bimodal_forward(t) = x, found by scan + bisection.
std::vector<double> bimodal_roots(double x, double tol = 1e-12);

} // namespace graphmdn
