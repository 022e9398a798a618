#pragma once

#include <span>
#include <vector>

namespace graphmdn {

/// ln(sum(exp(v))) computed with the max shift, never overflowing for
/// finite inputs. Throws std::domain_error on empty input.
double log_sum_exp(std::span<const double> v);

/// Max-shifted softmax. Output entries are positive and sum to 1.
std::vector<double> softmax(std::span<const double> v);

/// In-place softmax over a raw range.
void softmax_inplace(double* v, std::size_t n);

/// ELU(z) + 1, the positivity activation used for mixture scales:
/// z + 1 for z >= 0, exp(z) for z < 0, floored at `floor`.
double elu_plus_one(double z, double floor = 1e-6);

/// Derivative of elu_plus_one (0 wherever the floor clamps).
double elu_plus_one_grad(double z, double floor = 1e-6);

} // namespace graphmdn
