// SPDX-License-Identifier: Apache-2.0
#include "chartforge/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "chartforge/errors.hpp"
#include "chartforge/parallel.hpp"
#include "chartforge/rng.hpp"

namespace chartforge {

Matrix top_eigenvectors(const Matrix& symmetric, std::size_t count, std::vector<double>& values,
                        const PowerIterationOptions& options) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) {
    throw ShapeError("top_eigenvectors: matrix must be square, got " + symmetric.shape_string());
  }
  if (count > n) throw ConfigError("top_eigenvectors: more eigenpairs requested than rows");
  Matrix vectors(n, count);
  values.assign(count, 0.0);
  Rng rng(options.seed);
  std::vector<double> v(n), w(n);

  // A x with the already-found pairs deflated: A x - sum_k lambda_k v_k (v_k . x).
  auto apply = [&](std::size_t found, const std::vector<double>& x, std::vector<double>& y) {
    parallel_for(n, [&](std::size_t i) { y[i] = dot(symmetric.row(i).data(), x.data(), n); });
    for (std::size_t k = 0; k < found; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += vectors(i, k) * x[i];
      for (std::size_t i = 0; i < n; ++i) y[i] -= values[k] * vectors(i, k) * proj;
    }
  };
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (const double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (double& e : x) e /= s;
    }
    return s;
  };

  for (std::size_t k = 0; k < count; ++k) {
    for (double& e : v) e = rng.uniform(-1.0, 1.0);
    normalize(v);
    double lambda = 0.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      apply(k, v, w);
      // Rayleigh quotient with unit v.
      lambda = 0.0;
      for (std::size_t i = 0; i < n; ++i) lambda += v[i] * w[i];
      if (normalize(w) == 0.0) {
        lambda = 0.0;
        break;
      }
      // Fix the sign so convergence is measured on direction only.
      double align = 0.0;
      for (std::size_t i = 0; i < n; ++i) align += w[i] * v[i];
      if (align < 0.0) {
        for (double& e : w) e = -e;
      }
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(w[i] - v[i]));
      v.swap(w);
      if (change < options.tolerance) break;
    }
    values[k] = lambda;
    for (std::size_t i = 0; i < n; ++i) vectors(i, k) = v[i];
  }
  return vectors;
}

Matrix classical_mds(const Matrix& features, const PowerIterationOptions& options) {
  const std::size_t n = features.rows();
  if (n < 3) throw ConfigError("classical_mds needs at least 3 points");
  const std::size_t f = features.cols();

  // Squared distances via |a|^2 + |b|^2 - 2 a.b would lose precision for
  // nearby rows; accumulate differences directly.
  Matrix b(n, n);
  parallel_for(n, [&](std::size_t i) {
    const double* xi = features.row(i).data();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* xj = features.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        const double d = xi[k] - xj[k];
        s += d * d;
      }
      b(i, j) = s;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) b(i, j) = b(j, i);
  }

  // B = -1/2 J D2 J
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row_mean[i] += b(i, j);
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n) * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      b(i, j) = -0.5 * (b(i, j) - row_mean[i] - row_mean[j] + grand);
    }
  }

  std::vector<double> lambda;
  const Matrix v = top_eigenvectors(b, 2, lambda, options);
  Matrix out(n, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const double s = std::sqrt(std::max(lambda[k], 0.0));
    for (std::size_t i = 0; i < n; ++i) out(i, k) = v(i, k) * s;
  }
  return out;
}

}  // namespace chartforge
