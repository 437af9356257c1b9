// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chartforge/align.hpp"
#include "chartforge/dataset.hpp"
#include "chartforge/matrix.hpp"

namespace chartforge {

/// max(1, floor(0.05 N))
std::size_t default_neighbors(std::size_t n_points);

/// Continuity: penalizes true-space k-neighbors that fall outside the
/// embedding k-neighborhood, weighted by their embedding rank excess over k.
/// Ranks break distance ties by ascending point index. 1 is perfect.
double continuity_ct(const Matrix& positions, const Matrix& embeddings, std::size_t k);

/// Trustworthiness: penalizes embedding k-neighbors that are not true-space
/// k-neighbors, weighted by their true rank excess over k.
double trustworthiness_tw(const Matrix& positions, const Matrix& embeddings, std::size_t k);

/// Two-sample Kolmogorov-Smirnov statistic between the pairwise-distance
/// distributions of the two point sets, each normalized by its maximum.
double ks_statistic(const Matrix& positions, const Matrix& embeddings);

/// Histogram (bins over [0, 1]) KL divergence KL(P || E) of the same
/// normalized pairwise distances, with additive smoothing of empty bins.
double kl_divergence_hist(const Matrix& positions, const Matrix& embeddings,
                          std::size_t bins = 64);

/// Mean Euclidean error in meters. Throws ContractError for unaligned charts.
double mae(const Matrix& positions, const ChartEmbedding& chart);

struct ErrorVector {
  Vec2 truth;
  Vec2 predicted;
};

using ErrorVectorSet = std::vector<ErrorVector>;

ErrorVectorSet error_vectors(const Matrix& positions, const ChartEmbedding& chart);

struct MetricsReport {
  double ct = 0.0;
  double tw = 0.0;
  double ks = 0.0;
  double mae_m = 0.0;
  std::size_t k_neighbors = 0;
  std::size_t n_points = 0;
  std::optional<double> kl;

  /// "CT,TW,KS,MAE" header and one row.
  std::string to_csv() const;
  std::string to_json() const;
};

/// All metrics for an aligned chart. k = 0 selects default_neighbors(N).
MetricsReport evaluate_chart(const Matrix& positions, const ChartEmbedding& chart,
                             std::size_t k = 0, bool with_kl = false);

}  // namespace chartforge
