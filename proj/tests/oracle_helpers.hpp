// Test-only reference implementations, kept independent of the library's
// log-space code paths: densities are evaluated directly in long double and
// the mixtures are summed before a single log.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "graphmdn/mdn.hpp"

namespace gmdn_test {

inline long double ref_gaussian_pdf(std::span<const double> y, std::span<const double> mu,
                                    long double sigma) {
    const std::size_t d = y.size();
    long double sq = 0.0L;
    for (std::size_t i = 0; i < d; ++i) {
        const long double diff = static_cast<long double>(y[i]) - mu[i];
        sq += diff * diff;
    }
    const long double two_pi = 6.283185307179586476925286766559L;
    return std::pow(two_pi, -0.5L * d) * std::pow(sigma, -static_cast<long double>(d)) *
           std::exp(-sq / (2.0L * sigma * sigma));
}

// Direct evaluation of the node-level loss: product of per-node mixture
// densities, one log at the very end.
inline long double ref_node_nll(const graphmdn::NodeMixture& mix, std::span<const double> y) {
    const std::size_t k = mix.node_count, m = mix.kernels;
    long double total = 0.0L;
    for (std::size_t i = 0; i < k; ++i) {
        long double density = 0.0L;
        for (std::size_t j = 0; j < m; ++j) {
            std::span<const double> mu(mix.mu.data() + (i * m + j) * 3, 3);
            density += static_cast<long double>(mix.pi[i * m + j]) *
                       ref_gaussian_pdf(y.subspan(3 * i, 3), mu, mix.sigma[i * m + j]);
        }
        total += -std::log(density);
    }
    return total;
}

// Direct evaluation of the pose-level loss.
inline long double ref_pose_nll(const graphmdn::PoseMixture& mix, std::span<const double> y) {
    const std::size_t m = mix.kernels;
    long double density = 0.0L;
    for (std::size_t j = 0; j < m; ++j) {
        std::span<const double> mu(mix.mu.row(j), mix.mu.cols());
        density += static_cast<long double>(mix.pi[j]) * ref_gaussian_pdf(y, mu, mix.sigma[j]);
    }
    return -std::log(density);
}

} // namespace gmdn_test
