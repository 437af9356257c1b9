// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "chartforge/align.hpp"
#include "chartforge/dataset.hpp"
#include "chartforge/metrics.hpp"
#include "chartforge/train.hpp"

// Command implementations behind the `chartforge` tool. Each command reads
// and writes files only, so the same entry points serve the CLI and tests.

namespace chartforge {

std::string tool_version();

// Seed streams shared by train, eval, and baseline so all three see the same
// train/validation partition for a given seed.
std::uint64_t split_seed(std::uint64_t seed);

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string trajectory = "circle";  // circle | lissajous | polyline
  double radius = 5.0;
  Vec2 center;
  Vec2 amplitude{4.0, 3.0};
  Vec2 frequency{1.0, 2.0};
  std::vector<Vec2> waypoints;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::size_t links = 4;
  std::size_t subcarriers = 4;
  std::size_t taps = 32;
  std::size_t scatterers = 3;
  double wavelength = 2.0;
  double spacing_hz = 1.0e6;
  double noise = 0.0;
  bool noise_relative = false;
  std::size_t seq_len = kDefaultSeqLen;
  std::filesystem::path out;
};

struct SynthOutputs {
  std::filesystem::path dataset;
  std::filesystem::path positions_csv;
  std::array<std::size_t, 5> shape{};
};

TrajectorySpec make_trajectory(const SynthOptions& options);
ChannelSpec make_channel(const SynthOptions& options);

SynthOutputs cmd_synth(const SynthOptions& options, std::ostream& log);

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path out_dir;
  TrainConfig config;
  std::size_t seq_len = kDefaultSeqLen;
  double split_ratio = 0.9;
  bool standardize = false;
};

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path history_csv;
  std::filesystem::path manifest;
  TrainHistory history;
};

/// dataset -> flatten -> windows -> split -> train; writes checkpoint.bin,
/// history.csv, and manifest.json into out_dir.
TrainOutputs cmd_train(const TrainOptions& options, std::ostream& log);

/// Recovers the options recorded by cmd_train (out_dir left empty).
TrainOptions train_options_from_manifest(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir;
  double split_ratio = 0.9;
  bool standardize = false;
  std::size_t k = 0;  // 0: default_neighbors(N)
  bool with_kl = false;
};

struct SplitReport {
  MetricsReport train;
  MetricsReport val;
  AffineTransform transform;
};

/// Encodes every window, fits the affine map on the training split, applies it
/// to both splits, and writes per-split metrics, error vectors, and SVG charts.
SplitReport cmd_eval(const EvalOptions& options, std::ostream& log);

struct BaselineOptions {
  std::filesystem::path data;
  std::filesystem::path out_dir;
  std::size_t seq_len = kDefaultSeqLen;
  double split_ratio = 0.9;
  std::uint64_t seed = 0;
  std::size_t max_points = 2000;
  bool standardize = false;
  std::size_t k = 0;
  bool with_kl = false;
};

/// Classical MDS of the window-end CSI rows, then the same alignment and
/// metrics path as cmd_eval.
SplitReport cmd_baseline(const BaselineOptions& options, std::ostream& log);

/// Alignment + metrics + artifact export shared by eval and baseline. Files in
/// out_dir: metrics.json, metrics_{train,val}.csv, errors_{train,val}.csv,
/// chart_{train,val}.svg, transform.json. An empty out_dir writes nothing.
SplitReport evaluate_split_charts(const Matrix& train_positions, const Matrix& train_chart,
                                  const Matrix& val_positions, const Matrix& val_chart,
                                  std::size_t k, bool with_kl,
                                  const std::filesystem::path& out_dir,
                                  const std::string& label);

}  // namespace chartforge
