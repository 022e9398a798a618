#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "graphmdn/matrix.hpp"

namespace graphmdn {

// Raw head output layout, per node: [3M mean logits | M mixing logits |
// M scale logits]. Kernel j's mean logits occupy [3j, 3j+3).

constexpr double kSigmaFloor = 1e-6;

/// Per-node mixtures: an independent 3-component Gaussian mixture per joint.
struct NodeMixture {
    std::size_t node_count = 0;
    std::size_t kernels = 0;
    std::vector<double> mu;    // node-major: [i][j][coord], size K*M*3, in [-1,1]
    std::vector<double> sigma; // [i][j], size K*M, >= kSigmaFloor
    std::vector<double> pi;    // [i][j], size K*M, each node row on the simplex
};

/// One mixture over whole poses: each kernel mean is a full 3K pose.
struct PoseMixture {
    std::size_t node_count = 0;
    std::size_t kernels = 0;
    Matrix mu;                 // M x 3K, kernel rows
    std::vector<double> sigma; // M
    std::vector<double> pi;    // M
};

NodeMixture node_mixture_from_logits(const Matrix& logits, std::size_t kernels);

/// Pose-level aggregation: mixing and scale logits are averaged over nodes
/// before their activations; means are the concatenated per-node means.
PoseMixture pose_mixture_from_logits(const Matrix& logits, std::size_t kernels);

/// Log-density of an isotropic Gaussian in d dimensions:
/// -(d/2) ln(2 pi) - d ln(sigma) - ||y - mu||^2 / (2 sigma^2).
double gaussian_logpdf_iso(std::span<const double> y, std::span<const double> mu, double sigma,
                           std::size_t d);

enum class LossMode { kNode, kPose };

/// Negative log-likelihood of target pose y (3K, node-major) under the
/// node-level mixtures parameterized by `logits` (K x 5M). When `dlogits`
/// is non-null it is overwritten with the exact gradient.
///
/// `resp_blend` in [0,1] mixes the gradient's responsibilities with the
/// uniform distribution (EM-style smoothing against early kernel
/// starvation). The returned loss value is always the exact NLL; 0 gives
/// the exact gradient.
double node_nll(const Matrix& logits, std::span<const double> y, std::size_t kernels,
                Matrix* dlogits = nullptr, double resp_blend = 0.0);

/// Same for the single pose-level mixture.
double pose_nll(const Matrix& logits, std::span<const double> y, std::size_t kernels,
                Matrix* dlogits = nullptr, double resp_blend = 0.0);

/// Mean NLL over a batch. logits: (n*K) x 5M, targets: n x 3K.
/// dlogits, when given, receives the gradient of the mean.
double mixture_batch_nll(const Matrix& logits, int n, std::size_t node_count,
                         std::size_t kernels, const Matrix& targets, LossMode mode,
                         Matrix* dlogits = nullptr, double resp_blend = 0.0);

// Prediction dump: JSON lines, one record per sample, fields
// id, pi, sigma, mu (kernel rows of 3K floats), full float precision.
struct PredictionRecord {
    std::string id;
    PoseMixture mixture;
};

void write_predictions(std::ostream& out, std::span<const PredictionRecord> records);
void write_predictions_file(const std::string& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions_file(const std::string& path);

} // namespace graphmdn
