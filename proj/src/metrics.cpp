// SPDX-License-Identifier: Apache-2.0
#include "chartforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "chartforge/errors.hpp"
#include "chartforge/parallel.hpp"

namespace chartforge {

namespace {

void check_pair(const Matrix& a, const Matrix& b, const char* who) {
  if (a.cols() != 2 || b.cols() != 2 || a.rows() != b.rows()) {
    throw ShapeError(std::string(who) + ": point sets " + a.shape_string() + " and " +
                     b.shape_string() + " do not match");
  }
}

void check_k(std::size_t n, std::size_t k, const char* who) {
  // The normalizer 2 / (N k (2N - 3k - 1)) needs 2N - 3k - 1 > 0.
  if (k < 1 || k >= n || 2 * n <= 3 * k + 1) {
    throw ConfigError(std::string(who) + ": k = " + std::to_string(k) +
                      " out of range for N = " + std::to_string(n));
  }
}

double sq_dist(const Matrix& x, std::size_t i, std::size_t j) {
  const double dx = x(i, 0) - x(j, 0);
  const double dy = x(i, 1) - x(j, 1);
  return dx * dx + dy * dy;
}

// Indices of all points other than i ordered by increasing squared distance
// from i, ties broken by ascending index.
void sorted_neighbors(const Matrix& x, std::size_t i, std::vector<double>& d,
                      std::vector<std::uint32_t>& order) {
  const std::size_t n = x.rows();
  for (std::size_t j = 0; j < n; ++j) d[j] = sq_dist(x, i, j);
  order.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) order.push_back(static_cast<std::uint32_t>(j));
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return d[a] < d[b] || (d[a] == d[b] && a < b);
  });
}

// Shared body of trustworthiness and continuity: penalize members of the
// `from` k-neighborhood missing from the `to` k-neighborhood by their rank in
// `to` space. Memory stays O(N) per point.
double neighborhood_score(const Matrix& from, const Matrix& to, std::size_t k) {
  const std::size_t n = from.rows();
  std::vector<double> penalty(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> d(n);
    std::vector<std::uint32_t> from_order, to_order;
    sorted_neighbors(from, i, d, from_order);
    sorted_neighbors(to, i, d, to_order);
    std::vector<std::uint32_t> rank_to(n, 0);
    for (std::size_t r = 0; r < to_order.size(); ++r) {
      rank_to[to_order[r]] = static_cast<std::uint32_t>(r + 1);
    }
    double p = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t rt = rank_to[from_order[r]];
      if (rt > k) p += static_cast<double>(rt - k);
    }
    penalty[i] = p;
  });
  double total = 0.0;
  for (const double p : penalty) total += p;
  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  return 1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * total;
}

std::vector<double> normalized_distances(const Matrix& x, const char* which) {
  const std::size_t n = x.rows();
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(sq_dist(x, i, j)));
  }
  const double max = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
  if (!(max > 0.0)) {
    throw DegenerateGeometryError(std::string("all points coincide in the ") + which +
                                  " set; distances cannot be normalized");
  }
  for (double& v : d) v /= max;
  return d;
}

}  // namespace

std::size_t default_neighbors(std::size_t n_points) {
  return std::max<std::size_t>(1, n_points / 20);
}

double continuity_ct(const Matrix& positions, const Matrix& embeddings, std::size_t k) {
  check_pair(positions, embeddings, "continuity_ct");
  check_k(positions.rows(), k, "continuity_ct");
  return neighborhood_score(positions, embeddings, k);
}

double trustworthiness_tw(const Matrix& positions, const Matrix& embeddings, std::size_t k) {
  check_pair(positions, embeddings, "trustworthiness_tw");
  check_k(positions.rows(), k, "trustworthiness_tw");
  return neighborhood_score(embeddings, positions, k);
}

double ks_statistic(const Matrix& positions, const Matrix& embeddings) {
  check_pair(positions, embeddings, "ks_statistic");
  if (positions.rows() < 2) throw ConfigError("ks_statistic needs at least two points");
  std::vector<double> a = normalized_distances(positions, "position");
  std::vector<double> b = normalized_distances(embeddings, "embedding");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  // Advance past every copy of the next merged value before comparing CDFs.
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      v = a[i];
    } else {
      v = b[j];
    }
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

double kl_divergence_hist(const Matrix& positions, const Matrix& embeddings, std::size_t bins) {
  check_pair(positions, embeddings, "kl_divergence_hist");
  if (bins == 0) throw ConfigError("kl_divergence_hist needs at least one bin");
  auto histogram = [bins](const std::vector<double>& d) {
    std::vector<double> h(bins, 0.0);
    for (const double v : d) {
      const auto b = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
      h[b] += 1.0;
    }
    constexpr double kSmoothing = 1e-10;
    double total = 0.0;
    for (double& x : h) total += (x += kSmoothing);
    for (double& x : h) x /= total;
    return h;
  };
  const auto p = histogram(normalized_distances(positions, "position"));
  const auto q = histogram(normalized_distances(embeddings, "embedding"));
  double kl = 0.0;
  for (std::size_t b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
  return kl;
}

double mae(const Matrix& positions, const ChartEmbedding& chart) {
  if (!chart.aligned()) {
    throw ContractError("mae requires an aligned chart in meters");
  }
  check_pair(positions, chart.coords(), "mae");
  if (positions.rows() == 0) throw ShapeError("mae: empty point set");
  const Matrix& e = chart.coords();
  double sum = 0.0;
  for (std::size_t i = 0; i < positions.rows(); ++i) {
    sum += std::hypot(positions(i, 0) - e(i, 0), positions(i, 1) - e(i, 1));
  }
  return sum / static_cast<double>(positions.rows());
}

ErrorVectorSet error_vectors(const Matrix& positions, const ChartEmbedding& chart) {
  if (!chart.aligned()) {
    throw ContractError("error_vectors requires an aligned chart in meters");
  }
  check_pair(positions, chart.coords(), "error_vectors");
  ErrorVectorSet out;
  out.reserve(positions.rows());
  const Matrix& e = chart.coords();
  for (std::size_t i = 0; i < positions.rows(); ++i) {
    out.push_back({{positions(i, 0), positions(i, 1)}, {e(i, 0), e(i, 1)}});
  }
  return out;
}

std::string MetricsReport::to_csv() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "CT,TW,KS,MAE\n%.17g,%.17g,%.17g,%.17g\n", ct, tw, ks, mae_m);
  return buf;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["ct"] = ct;
  j["tw"] = tw;
  j["ks"] = ks;
  j["mae_m"] = mae_m;
  j["k_neighbors"] = k_neighbors;
  j["n_points"] = n_points;
  if (kl) j["kl"] = *kl;
  return j.dump(2);
}

MetricsReport evaluate_chart(const Matrix& positions, const ChartEmbedding& chart, std::size_t k,
                             bool with_kl) {
  const Matrix& e = chart.coords();
  check_pair(positions, e, "evaluate_chart");
  MetricsReport r;
  r.n_points = positions.rows();
  r.k_neighbors = k == 0 ? default_neighbors(r.n_points) : k;
  r.ct = continuity_ct(positions, e, r.k_neighbors);
  r.tw = trustworthiness_tw(positions, e, r.k_neighbors);
  r.ks = ks_statistic(positions, e);
  r.mae_m = mae(positions, chart);
  if (with_kl) r.kl = kl_divergence_hist(positions, e);
  return r;
}

}  // namespace chartforge
