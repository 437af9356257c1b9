// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "chartforge/errors.hpp"
#include "chartforge/matrix.hpp"
#include "chartforge/rng.hpp"

namespace chartforge {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

inline constexpr std::size_t kDefaultSeqLen = 10;
inline constexpr double kDefaultSpeed = 0.3;            // m/s
inline constexpr double kDefaultSampleInterval = 0.192;  // s

// ---------------------------------------------------------------------------
// Raw CSI tensor

/// CSI tensor of shape (samples, links, 2, subcarriers, taps), row-major, with
/// axis 2 holding real and imaginary parts, plus one 2-D position per sample.
struct CsiDataset {
  std::array<std::size_t, 5> shape{};
  std::vector<double> csi;
  Matrix positions;  // samples x 2, meters
  double sample_interval = kDefaultSampleInterval;

  std::size_t samples() const { return shape[0]; }
  std::size_t links() const { return shape[1]; }
  std::size_t subcarriers() const { return shape[3]; }
  std::size_t taps() const { return shape[4]; }
  /// links * 2 * subcarriers * taps
  std::size_t features() const { return shape[1] * shape[2] * shape[3] * shape[4]; }

  double& at(std::size_t n, std::size_t link, std::size_t part, std::size_t sc, std::size_t tap) {
    return csi[(((n * shape[1] + link) * 2 + part) * shape[3] + sc) * shape[4] + tap];
  }
  double at(std::size_t n, std::size_t link, std::size_t part, std::size_t sc,
            std::size_t tap) const {
    return csi[(((n * shape[1] + link) * 2 + part) * shape[3] + sc) * shape[4] + tap];
  }

  /// Throws ShapeError when the shape, payload, and positions disagree.
  void validate() const;

  bool operator==(const CsiDataset&) const = default;
};

// ---------------------------------------------------------------------------
// Synthetic generator

struct CircleTrajectory {
  Vec2 center;
  double radius = 5.0;
};

/// x = cx + ax sin(fx t + phase), y = cy + ay sin(fy t), t in [0, 2 pi).
/// Frequencies must be positive integers so the curve closes.
struct LissajousTrajectory {
  Vec2 center;
  Vec2 amplitude{4.0, 3.0};
  Vec2 frequency{1.0, 2.0};
  double phase = 1.5707963267948966;
};

/// Closed polygon traversed in waypoint order, returning to the first point.
struct PolylineTrajectory {
  std::vector<Vec2> waypoints;
};

using TrajectorySpec = std::variant<CircleTrajectory, LissajousTrajectory, PolylineTrajectory>;

/// Geometric path-sum channel. Link l connects the user to anchors[l]; each
/// scatterer of that link adds one single-bounce path.
struct ChannelSpec {
  std::vector<Vec2> anchors;
  std::vector<std::vector<Vec2>> scatterers;  // empty, or one list per anchor
  double wavelength = 2.0;                    // carrier wavelength, meters
  double subcarrier_spacing_hz = 1.0e6;       // spacing of the frequency grid
  std::size_t n_subcarriers = 4;
  std::size_t n_taps = 32;
  double noise_std = 0.0;
  /// When set, noise_std is a fraction of the mean noiseless tap magnitude.
  bool noise_relative = false;
  double speed = kDefaultSpeed;
  double sample_interval = kDefaultSampleInterval;
};

/// Anchors at the corners of a square of half-width `spread` around `center`
/// (continuing on a ring beyond four links) and `scatterers_per_link` random
/// scatterers per link drawn from `seed`.
ChannelSpec default_channel(std::size_t n_links, Vec2 center, std::uint64_t seed,
                            std::size_t scatterers_per_link = 3, double spread = 12.0);

/// Positions at constant speed along the trajectory, `step` meters apart.
Matrix sample_trajectory(const TrajectorySpec& trajectory, std::size_t n_samples, double step);

/// Frequency-domain response of one link at `position` for the given
/// wavelengths: the sum over paths of exp(-j 2 pi d / lambda) / d.
void path_sum_response(const ChannelSpec& channel, std::size_t link, Vec2 position,
                       std::span<const double> wavelengths, std::span<double> re,
                       std::span<double> im);

/// Seeded synthetic dataset. Throws ConfigError on zero anchors, non-positive
/// wavelength, or n_samples < seq_len + 1.
CsiDataset generate_synthetic_csi(const TrajectorySpec& trajectory, const ChannelSpec& channel,
                                  std::size_t n_samples, std::uint64_t seed,
                                  std::size_t seq_len = kDefaultSeqLen);

// ---------------------------------------------------------------------------
// Preprocessing

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // 1 for constant features

  void apply(Matrix& flat) const;
  void invert(Matrix& flat) const;
};

struct FlatCsi {
  Matrix features;  // N x F
  std::optional<Standardizer> stats;
};

FlatCsi flatten(const CsiDataset& d, bool standardize = false);

/// One sliding window, identified by the index of its last row.
struct Window {
  std::size_t end = 0;
  Vec2 position;
  bool operator==(const Window&) const = default;
};

/// Windows of length `seq_len` ending at every index seq_len-1 .. N-1.
std::vector<Window> build_sequences(const Matrix& flat, const Matrix& positions,
                                    std::size_t seq_len);

/// Materialized windows: inputs are batch x seq_len x features. The
/// reconstruction target is the input itself.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t features = 0;
  std::vector<double> inputs;
  Matrix positions;  // batch x 2, end-of-window positions
  std::vector<std::size_t> source_indices;

  std::span<const double> sequence(std::size_t b) const {
    return {inputs.data() + b * seq_len * features, seq_len * features};
  }
  std::span<const double> targets_csi() const { return inputs; }
};

SequenceBatch gather_batch(const Matrix& flat, std::span<const Window> windows,
                           std::size_t seq_len);

/// Seeded shuffle, then the first floor(ratio * M) items form the training part.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(std::vector<T> items, double ratio,
                                                std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split ratio must lie in (0, 1)");
  }
  if (items.empty()) {
    throw ConfigError("cannot split an empty sample list");
  }
  Rng rng(seed);
  rng.shuffle(std::span<T>(items));
  const auto n_train = static_cast<std::size_t>(ratio * static_cast<double>(items.size()));
  std::vector<T> val(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  items.resize(n_train);
  return {std::move(items), std::move(val)};
}

// ---------------------------------------------------------------------------
// Storage

void save_dataset(const CsiDataset& d, const std::filesystem::path& path);
CsiDataset load_dataset(const std::filesystem::path& path);

/// Writes "x,y" lines.
void save_positions_csv(const Matrix& positions, const std::filesystem::path& path);
/// Reads "x,y" lines (an optional non-numeric header line is skipped).
Matrix load_positions_csv(const std::filesystem::path& path);

}  // namespace chartforge
