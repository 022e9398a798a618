#include "graphmdn/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace graphmdn {

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw std::domain_error("log_sum_exp: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw std::domain_error("softmax: empty input");
    std::vector<double> out(v.begin(), v.end());
    softmax_inplace(out.data(), out.size());
    return out;
}

void softmax_inplace(double* v, std::size_t n) {
    if (n == 0) throw std::domain_error("softmax: empty input");
    const double m = *std::max_element(v, v + n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - m);
        acc += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        v[i] /= acc;
        // exp underflow for very spread inputs; keep components strictly
        // positive (the sum stays within 1e-12 of one)
        if (v[i] < std::numeric_limits<double>::min()) {
            v[i] = std::numeric_limits<double>::min();
        }
    }
}

double elu_plus_one(double z, double floor) {
    const double v = z >= 0.0 ? z + 1.0 : std::exp(z);
    return v < floor ? floor : v;
}

double elu_plus_one_grad(double z, double floor) {
    const double v = z >= 0.0 ? z + 1.0 : std::exp(z);
    if (v < floor) return 0.0;
    return z >= 0.0 ? 1.0 : v;
}

} // namespace graphmdn
