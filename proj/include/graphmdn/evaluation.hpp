#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "graphmdn/data.hpp"
#include "graphmdn/matrix.hpp"
#include "graphmdn/mdn.hpp"

namespace graphmdn {

/// The M candidate poses of one sample with their mixture weights.
struct HypothesisSet {
    std::string id;
    Matrix mu;              // M x 3K kernel means
    std::vector<double> pi; // M, on the simplex
};

HypothesisSet hypotheses_from_mixture(const std::string& id, const PoseMixture& mixture);

/// Mean of the kernel with the largest mixing coefficient (ties: lowest index).
std::vector<double> select_highest(const HypothesisSet& h);

/// Mixture mean: sum of pi_j * mu_j.
std::vector<double> select_mean(const HypothesisSet& h);

/// Kernel mean closest to the ground truth in MPJPE (ties: lowest index).
/// An upper-bound diagnostic, not a deployable predictor.
std::vector<double> select_oracle(const HypothesisSet& h, std::span<const double> gt);

/// Mean per-joint Euclidean distance between two node-major 3K vectors.
double mpjpe(std::span<const double> pred, std::span<const double> gt);

/// Similarity (or, with `with_scale` false, strictly rigid) transform of
/// `pred` minimizing the summed squared distance to `gt`; returns the
/// transformed points. Solved by centering and a 3x3 Jacobi SVD of the
/// cross-covariance, with reflection corrected on the smallest singular axis.
/// Throws AlignmentError for rank-deficient configurations.
Matrix procrustes_align(const Matrix& pred, const Matrix& gt, bool with_scale = true);

/// MPJPE after Procrustes alignment of pred onto gt.
double p_mpjpe(std::span<const double> pred, std::span<const double> gt, bool with_scale = true);

enum class Strategy { kHighest = 0, kMean = 1, kOracle = 2 };
enum class Protocol { kMpjpe = 0, kPmpjpe = 1 };

inline constexpr std::array<const char*, 3> kStrategyNames{"highest", "mean", "oracle"};
inline constexpr std::array<const char*, 2> kProtocolNames{"mpjpe", "p_mpjpe"};

/// Per-action and aggregate errors in millimeters for every selection
/// strategy under both protocols.
struct EvalReport {
    std::vector<std::string> actions; // sorted
    std::vector<std::size_t> action_counts;
    std::size_t total_samples = 0;
    // indexed [strategy][protocol]
    std::array<std::array<std::vector<double>, 2>, 3> per_action;
    std::array<std::array<double, 2>, 3> average{};

    double value(Strategy s, Protocol p, std::size_t action_index) const {
        return per_action[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)][action_index];
    }
    double avg(Strategy s, Protocol p) const {
        return average[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)];
    }
};

/// Joins predictions and ground truth by id (exact match both ways; the
/// error lists missing ids), de-normalizes with the manifest scale and
/// aggregates per action. Deterministic regardless of input order.
EvalReport evaluate(std::span<const PredictionRecord> predictions,
                    std::span<const SampleRecord> ground_truth,
                    const DatasetManifest& manifest, bool p2_with_scale = true);

void write_eval_csv(std::ostream& out, const EvalReport& report);
void write_eval_json(std::ostream& out, const EvalReport& report);

} // namespace graphmdn
