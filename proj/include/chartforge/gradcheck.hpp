// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

namespace chartforge {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
/// Throws NumericError naming the coordinate if f is non-finite at a probe.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-8);

}  // namespace chartforge
