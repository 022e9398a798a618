#include "graphmdn/gradcheck.hpp"

#include <cmath>

#include "graphmdn/errors.hpp"

namespace graphmdn {

GradCheckReport grad_check(const LossFn& loss, std::span<const double> params,
                           std::span<const double> analytic, double epsilon) {
    if (params.size() != analytic.size()) {
        throw ShapeError("grad_check: params/analytic length mismatch");
    }
    if (!(epsilon > 0.0)) {
        throw std::domain_error("grad_check: epsilon must be positive");
    }

    GradCheckReport report;
    report.analytic.assign(analytic.begin(), analytic.end());
    report.numeric.resize(params.size());

    std::vector<double> p(params.begin(), params.end());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + epsilon;
        const double f_plus = loss(p);
        p[i] = saved - epsilon;
        const double f_minus = loss(p);
        p[i] = saved;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw NumericError("grad_check: non-finite loss at parameter index " +
                               std::to_string(i));
        }
        report.numeric[i] = (f_plus - f_minus) / (2.0 * epsilon);

        const double denom = std::max({std::abs(report.analytic[i]),
                                       std::abs(report.numeric[i]), 1e-8});
        const double rel = std::abs(report.analytic[i] - report.numeric[i]) / denom;
        if (rel >= report.max_rel_error) {
            // >= so the index is defined even for an all-zero gradient
            report.max_rel_error = rel;
            report.argmax_index = i;
        }
    }
    return report;
}

} // namespace graphmdn
