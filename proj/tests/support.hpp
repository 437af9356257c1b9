// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. They favor obviousness over speed and share no code with
// the library beyond the Matrix container and Rng.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chartforge/dataset.hpp"
#include "chartforge/gradcheck.hpp"
#include "chartforge/loss.hpp"
#include "chartforge/matrix.hpp"
#include "chartforge/model.hpp"
#include "chartforge/rng.hpp"

namespace oracle {

using chartforge::Matrix;

inline Matrix random_points(chartforge::Rng& rng, std::size_t n, double scale = 1.0) {
  Matrix m(n, 2);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

inline double sq(const Matrix& x, std::size_t i, std::size_t j) {
  const double dx = x(i, 0) - x(j, 0), dy = x(i, 1) - x(j, 1);
  return dx * dx + dy * dy;
}

// 1-based rank of j among the points other than i, by distance from i with
// ties going to the lower index.
inline std::size_t rank_of(const Matrix& x, std::size_t i, std::size_t j) {
  std::size_t r = 1;
  const double dij = sq(x, i, j);
  for (std::size_t m = 0; m < x.rows(); ++m) {
    if (m == i || m == j) continue;
    const double dim = sq(x, i, m);
    if (dim < dij || (dim == dij && m < j)) ++r;
  }
  return r;
}

// Penalize j in the k-neighborhood of i in `from` but outside it in `to`, by
// j's rank in `to`.
inline double neighborhood_score(const Matrix& from, const Matrix& to, std::size_t k) {
  const std::size_t n = from.rows();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const std::size_t r_from = rank_of(from, i, j);
      const std::size_t r_to = rank_of(to, i, j);
      if (r_from <= k && r_to > k) sum += static_cast<double>(r_to - k);
    }
  }
  const double N = static_cast<double>(n), K = static_cast<double>(k);
  return 1.0 - 2.0 / (N * K * (2.0 * N - 3.0 * K - 1.0)) * sum;
}

inline double continuity(const Matrix& p, const Matrix& e, std::size_t k) {
  return neighborhood_score(p, e, k);
}
inline double trustworthiness(const Matrix& p, const Matrix& e, std::size_t k) {
  return neighborhood_score(e, p, k);
}

inline std::vector<double> normalized_pair_distances(const Matrix& x) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) d.push_back(std::sqrt(sq(x, i, j)));
  }
  const double mx = *std::max_element(d.begin(), d.end());
  for (double& v : d) v /= mx;
  return d;
}

// Empirical CDFs evaluated at every observed value of either sample.
inline double ks(const Matrix& p, const Matrix& e) {
  std::vector<double> a = normalized_pair_distances(p), b = normalized_pair_distances(e);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto cdf = [](const std::vector<double>& s, double v) {
    return static_cast<double>(std::upper_bound(s.begin(), s.end(), v) - s.begin()) /
           static_cast<double>(s.size());
  };
  double sup = 0.0;
  for (const auto* s : {&a, &b}) {
    for (const double v : *s) sup = std::max(sup, std::abs(cdf(a, v) - cdf(b, v)));
  }
  return sup;
}

inline double mae(const Matrix& p, const Matrix& e) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double dx = p(i, 0) - e(i, 0), dy = p(i, 1) - e(i, 1);
    s += std::sqrt(dx * dx + dy * dy);
  }
  return s / static_cast<double>(p.rows());
}

// Ordered-pair double sum, normalized by B(B-1).
inline double topology(const Matrix& p, const Matrix& e) {
  const std::size_t b = p.rows();
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      const double diff = std::sqrt(sq(p, i, j)) - std::sqrt(sq(e, i, j));
      s += diff * diff;
    }
  }
  return s / static_cast<double>(b * (b - 1));
}

inline double reconstruction(const std::vector<double>& x, const std::vector<double>& xh,
                             std::size_t B, std::size_t L, std::size_t F) {
  double s = 0.0;
  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        const double r = x[(n * L + t) * F + f] - xh[(n * L + t) * F + f];
        s += r * r;
      }
    }
  }
  return s / static_cast<double>(B * L * F);
}

// ---------------------------------------------------------------------------
// Full-model gradient check

struct ToyProblem {
  chartforge::ModelParams params;
  chartforge::SequenceBatch batch;
};

// Random parameters in [-0.6, 0.6] (biases included, so no block is zero)
// and a random batch with random target positions.
inline ToyProblem toy_problem(const chartforge::ModelDims& dims, std::size_t batch,
                              std::uint64_t seed) {
  chartforge::Rng rng(seed);
  ToyProblem tp;
  tp.params = chartforge::zero_params(dims);
  tp.params.seed = seed;
  for (double& v : tp.params.values) v = rng.uniform(-0.6, 0.6);
  auto& b = tp.batch;
  b.batch = batch;
  b.seq_len = dims.seq_len;
  b.features = dims.features;
  b.inputs.resize(batch * dims.seq_len * dims.features);
  for (double& v : b.inputs) v = rng.uniform(-1.0, 1.0);
  b.positions = random_points(rng, batch, 2.0);
  for (std::size_t i = 0; i < batch; ++i) b.source_indices.push_back(i);
  return tp;
}

inline double toy_total_loss(const ToyProblem& tp, std::span<const double> values, double alpha) {
  chartforge::ModelParams p = tp.params;
  p.values.assign(values.begin(), values.end());
  const auto fwd = chartforge::forward(tp.batch, p);
  return chartforge::total_loss(tp.batch.targets_csi(), fwd.reconstruction, tp.batch.positions,
                                fwd.embeddings, alpha)
      .parts.total;
}

inline std::vector<double> toy_analytic_grad(const ToyProblem& tp, double alpha) {
  const auto fwd = chartforge::forward(tp.batch, tp.params);
  const auto tl = chartforge::total_loss(tp.batch.targets_csi(), fwd.reconstruction,
                                         tp.batch.positions, fwd.embeddings, alpha);
  return chartforge::backward(tp.batch, tp.params, fwd, tl.d_embed, tl.d_recon);
}

struct BlockError {
  std::string name;
  double rel_error;       // worst single coordinate
  double norm_rel_error;  // |a - n| / max(|a|, |n|) over the whole block
};

// Per-block relative errors between backprop and central differences.
inline std::vector<BlockError> gradient_check(const chartforge::ModelDims& dims, std::size_t batch,
                                              std::uint64_t seed, double alpha, double eps) {
  const ToyProblem tp = toy_problem(dims, batch, seed);
  const auto analytic = toy_analytic_grad(tp, alpha);
  const auto numeric = chartforge::finite_diff_grad(
      [&](std::span<const double> v) { return toy_total_loss(tp, v, alpha); }, tp.params.values,
      eps);
  std::vector<BlockError> out;
  const chartforge::ParamLayout layout(dims);
  for (const auto& info : layout.blocks()) {
    const std::span<const double> a(analytic.data() + info.offset, info.size());
    const std::span<const double> n(numeric.data() + info.offset, info.size());
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      diff += (a[i] - n[i]) * (a[i] - n[i]);
      na += a[i] * a[i];
      nn += n[i] * n[i];
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
    out.push_back({info.name, chartforge::max_relative_error(a, n), std::sqrt(diff) / scale});
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("chartforge_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
