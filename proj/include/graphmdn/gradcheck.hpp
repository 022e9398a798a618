#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace graphmdn {

/// Result of a central-difference gradient check.
struct GradCheckReport {
    std::vector<double> analytic;
    std::vector<double> numeric;
    double max_rel_error = 0.0;
    std::size_t argmax_index = 0;

    bool passes(double tol) const { return max_rel_error < tol; }
};

using LossFn = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences of `loss` at `params`.
/// Relative error per parameter uses denominator max(|analytic|, |numeric|, 1e-8).
/// The loss must be deterministic in the parameters (dropout off, fixed batch).
/// Throws NumericError (with the offending index) if a perturbed loss is non-finite.
GradCheckReport grad_check(const LossFn& loss, std::span<const double> params,
                           std::span<const double> analytic, double epsilon);

} // namespace graphmdn
