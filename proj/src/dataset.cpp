// SPDX-License-Identifier: Apache-2.0
#include "chartforge/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "byteio.hpp"
#include "chartforge/parallel.hpp"

namespace chartforge {

using detail::put;
using detail::Reader;
using detail::read_file;

namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr std::uint32_t kFormatVersion = 1;
constexpr char kMagic[4] = {'C', 'S', 'I', 'D'};

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Arc-length parametrization of a closed curve by dense tabulation.
class ArcTable {
 public:
  template <typename Curve>
  ArcTable(Curve curve, std::size_t resolution) : points_(resolution + 1), cumulative_(resolution + 1) {
    for (std::size_t i = 0; i <= resolution; ++i) {
      points_[i] = curve(2.0 * std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(resolution));
      cumulative_[i] = i == 0 ? 0.0 : cumulative_[i - 1] + distance(points_[i - 1], points_[i]);
    }
  }

  double length() const { return cumulative_.back(); }

  Vec2 at(double s) const {
    s = std::fmod(s, length());
    if (s < 0) s += length();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const std::size_t hi = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
    const std::size_t lo = hi - 1;
    const double span = cumulative_[hi] - cumulative_[lo];
    const double t = span > 0 ? (s - cumulative_[lo]) / span : 0.0;
    return {points_[lo].x + t * (points_[hi].x - points_[lo].x),
            points_[lo].y + t * (points_[hi].y - points_[lo].y)};
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

bool is_positive_integer(double v) { return v >= 1.0 && std::floor(v) == v; }

}  // namespace

// ---------------------------------------------------------------------------

void CsiDataset::validate() const {
  if (shape[2] != 2) {
    throw ShapeError("CSI axis 2 must have length 2 (real, imaginary), got " +
                     std::to_string(shape[2]));
  }
  const std::size_t expected = shape[0] * features();
  if (csi.size() != expected) {
    throw ShapeError("CSI payload holds " + std::to_string(csi.size()) + " values, shape needs " +
                     std::to_string(expected));
  }
  if (positions.rows() != shape[0] || positions.cols() != 2) {
    throw ShapeError("positions must be " + std::to_string(shape[0]) + "x2, got " +
                     positions.shape_string());
  }
}

ChannelSpec default_channel(std::size_t n_links, Vec2 center, std::uint64_t seed,
                            std::size_t scatterers_per_link, double spread) {
  ChannelSpec spec;
  const Vec2 corners[4] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  for (std::size_t l = 0; l < n_links; ++l) {
    if (l < 4) {
      spec.anchors.push_back({center.x + spread * corners[l].x, center.y + spread * corners[l].y});
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(l - 4) /
                               static_cast<double>(n_links - 4) + std::numbers::pi / 8.0;
      spec.anchors.push_back({center.x + 1.3 * spread * std::cos(angle),
                              center.y + 1.3 * spread * std::sin(angle)});
    }
  }
  Rng rng(derive_seed(seed, 0x5ca7));
  spec.scatterers.resize(n_links);
  for (auto& list : spec.scatterers) {
    for (std::size_t s = 0; s < scatterers_per_link; ++s) {
      list.push_back({center.x + rng.uniform(-spread, spread),
                      center.y + rng.uniform(-spread, spread)});
    }
  }
  return spec;
}

Matrix sample_trajectory(const TrajectorySpec& trajectory, std::size_t n_samples, double step) {
  Matrix out(n_samples, 2);
  auto emit = [&](std::size_t i, Vec2 p) {
    out(i, 0) = p.x;
    out(i, 1) = p.y;
  };
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, CircleTrajectory>) {
          if (!(spec.radius > 0.0)) throw ConfigError("circle radius must be positive");
          for (std::size_t i = 0; i < n_samples; ++i) {
            const double angle = static_cast<double>(i) * step / spec.radius;
            emit(i, {spec.center.x + spec.radius * std::cos(angle),
                     spec.center.y + spec.radius * std::sin(angle)});
          }
        } else if constexpr (std::is_same_v<T, LissajousTrajectory>) {
          if (!is_positive_integer(spec.frequency.x) || !is_positive_integer(spec.frequency.y)) {
            throw ConfigError("lissajous frequencies must be positive integers");
          }
          if (!(spec.amplitude.x > 0.0) || !(spec.amplitude.y > 0.0)) {
            throw ConfigError("lissajous amplitudes must be positive");
          }
          const ArcTable table(
              [&](double t) {
                return Vec2{spec.center.x + spec.amplitude.x * std::sin(spec.frequency.x * t + spec.phase),
                            spec.center.y + spec.amplitude.y * std::sin(spec.frequency.y * t)};
              },
              1 << 16);
          for (std::size_t i = 0; i < n_samples; ++i) emit(i, table.at(static_cast<double>(i) * step));
        } else {
          const auto& w = spec.waypoints;
          if (w.size() < 2) throw ConfigError("polyline needs at least two waypoints");
          std::vector<double> cumulative(w.size() + 1, 0.0);
          for (std::size_t k = 0; k < w.size(); ++k) {
            cumulative[k + 1] = cumulative[k] + distance(w[k], w[(k + 1) % w.size()]);
          }
          const double perimeter = cumulative.back();
          if (!(perimeter > 0.0)) throw ConfigError("polyline waypoints are all coincident");
          for (std::size_t i = 0; i < n_samples; ++i) {
            const double s = std::fmod(static_cast<double>(i) * step, perimeter);
            std::size_t k = static_cast<std::size_t>(
                std::upper_bound(cumulative.begin(), cumulative.end(), s) - cumulative.begin() - 1);
            k = std::min(k, w.size() - 1);
            const Vec2 a = w[k];
            const Vec2 b = w[(k + 1) % w.size()];
            const double len = cumulative[k + 1] - cumulative[k];
            const double t = len > 0 ? (s - cumulative[k]) / len : 0.0;
            emit(i, {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
          }
        }
      },
      trajectory);
  return out;
}

void path_sum_response(const ChannelSpec& channel, std::size_t link, Vec2 position,
                       std::span<const double> wavelengths, std::span<double> re,
                       std::span<double> im) {
  const Vec2 anchor = channel.anchors.at(link);
  std::vector<double> path_lengths{distance(position, anchor)};
  if (!channel.scatterers.empty()) {
    for (const Vec2& s : channel.scatterers.at(link)) {
      path_lengths.push_back(distance(position, s) + distance(s, anchor));
    }
  }
  for (std::size_t m = 0; m < wavelengths.size(); ++m) {
    double sum_re = 0.0, sum_im = 0.0;
    for (const double d : path_lengths) {
      const double phase = -2.0 * std::numbers::pi * d / wavelengths[m];
      sum_re += std::cos(phase) / d;
      sum_im += std::sin(phase) / d;
    }
    re[m] = sum_re;
    im[m] = sum_im;
  }
}

CsiDataset generate_synthetic_csi(const TrajectorySpec& trajectory, const ChannelSpec& channel,
                                  std::size_t n_samples, std::uint64_t seed,
                                  std::size_t seq_len) {
  if (channel.anchors.empty()) throw ConfigError("channel needs at least one anchor");
  if (!(channel.wavelength > 0.0)) throw ConfigError("wavelength must be positive");
  if (n_samples < seq_len + 1) {
    throw ConfigError("n_samples (" + std::to_string(n_samples) + ") must be at least seq_len + 1 (" +
                      std::to_string(seq_len + 1) + ")");
  }
  if (!channel.scatterers.empty() && channel.scatterers.size() != channel.anchors.size()) {
    throw ConfigError("scatterer lists must match the anchor count");
  }
  if (channel.n_subcarriers == 0 || channel.n_taps == 0) {
    throw ConfigError("subcarrier and tap counts must be positive");
  }
  if (!(channel.speed > 0.0) || !(channel.sample_interval > 0.0)) {
    throw ConfigError("speed and sample interval must be positive");
  }
  if (!(channel.noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");

  const std::size_t links = channel.anchors.size();
  const std::size_t S = channel.n_subcarriers;
  const std::size_t K = channel.n_taps;
  const std::size_t M = S * K;

  // Frequency grid centered on the carrier: M bins, S groups of K bins.
  const double carrier = kSpeedOfLight / channel.wavelength;
  std::vector<double> wavelengths(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double f = carrier + (static_cast<double>(m) - 0.5 * static_cast<double>(M - 1)) *
                                   channel.subcarrier_spacing_hz;
    if (!(f > 0.0)) throw ConfigError("subcarrier grid extends to non-positive frequency");
    wavelengths[m] = kSpeedOfLight / f;
  }

  // IDFT twiddles e^{+j 2 pi k n / K}.
  std::vector<double> tw_cos(K * K), tw_sin(K * K);
  for (std::size_t n = 0; n < K; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>((k * n) % K) / static_cast<double>(K);
      tw_cos[n * K + k] = std::cos(a);
      tw_sin[n * K + k] = std::sin(a);
    }
  }

  CsiDataset d;
  d.shape = {n_samples, links, 2, S, K};
  d.sample_interval = channel.sample_interval;
  d.positions = sample_trajectory(trajectory, n_samples, channel.speed * channel.sample_interval);
  d.csi.assign(n_samples * d.features(), 0.0);

  parallel_for(n_samples, [&](std::size_t i) {
    const Vec2 p{d.positions(i, 0), d.positions(i, 1)};
    std::vector<double> re(M), im(M);
    for (std::size_t l = 0; l < links; ++l) {
      path_sum_response(channel, l, p, wavelengths, re, im);
      for (std::size_t s = 0; s < S; ++s) {
        const double* hr = re.data() + s * K;
        const double* hi = im.data() + s * K;
        for (std::size_t n = 0; n < K; ++n) {
          const double* c = tw_cos.data() + n * K;
          const double* sn = tw_sin.data() + n * K;
          double acc_re = 0.0, acc_im = 0.0;
          for (std::size_t k = 0; k < K; ++k) {
            acc_re += hr[k] * c[k] - hi[k] * sn[k];
            acc_im += hr[k] * sn[k] + hi[k] * c[k];
          }
          d.at(i, l, 0, s, n) = acc_re / static_cast<double>(K);
          d.at(i, l, 1, s, n) = acc_im / static_cast<double>(K);
        }
      }
    }
  });

  if (channel.noise_std > 0.0) {
    double sigma = channel.noise_std;
    if (channel.noise_relative) {
      double total = 0.0;
      const std::size_t complex_count = d.csi.size() / 2;
      for (std::size_t i = 0; i < n_samples; ++i) {
        for (std::size_t l = 0; l < links; ++l) {
          for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t n = 0; n < K; ++n) {
              total += std::hypot(d.at(i, l, 0, s, n), d.at(i, l, 1, s, n));
            }
          }
        }
      }
      sigma *= total / static_cast<double>(complex_count);
    }
    Rng rng(derive_seed(seed, 0x4015e));
    for (double& v : d.csi) v += sigma * rng.normal();
  }
  return d;
}

// ---------------------------------------------------------------------------

void Standardizer::apply(Matrix& flat) const {
  for (std::size_t i = 0; i < flat.rows(); ++i) {
    auto row = flat.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / stddev[j];
  }
}

void Standardizer::invert(Matrix& flat) const {
  for (std::size_t i = 0; i < flat.rows(); ++i) {
    auto row = flat.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = row[j] * stddev[j] + mean[j];
  }
}

FlatCsi flatten(const CsiDataset& d, bool standardize) {
  d.validate();
  FlatCsi out{Matrix(d.samples(), d.features(), d.csi), std::nullopt};
  if (standardize) {
    const std::size_t n = d.samples();
    const std::size_t f = d.features();
    Standardizer stats{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < f; ++j) stats.mean[j] += out.features(i, j);
    }
    for (double& m : stats.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < f; ++j) {
        const double dv = out.features(i, j) - stats.mean[j];
        stats.stddev[j] += dv * dv;
      }
    }
    for (double& s : stats.stddev) {
      s = std::sqrt(s / static_cast<double>(n));
      if (!(s > 0.0)) s = 1.0;
    }
    stats.apply(out.features);
    out.stats = std::move(stats);
  }
  return out;
}

std::vector<Window> build_sequences(const Matrix& flat, const Matrix& positions,
                                    std::size_t seq_len) {
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  if (positions.rows() != flat.rows() || positions.cols() != 2) {
    throw ShapeError("positions " + positions.shape_string() + " do not match " +
                     std::to_string(flat.rows()) + " CSI rows");
  }
  if (flat.rows() < seq_len) {
    throw ConfigError("insufficient data: " + std::to_string(flat.rows()) +
                      " rows cannot form a window of length " + std::to_string(seq_len));
  }
  std::vector<Window> windows;
  windows.reserve(flat.rows() - seq_len + 1);
  for (std::size_t end = seq_len - 1; end < flat.rows(); ++end) {
    windows.push_back({end, {positions(end, 0), positions(end, 1)}});
  }
  return windows;
}

SequenceBatch gather_batch(const Matrix& flat, std::span<const Window> windows,
                           std::size_t seq_len) {
  SequenceBatch batch;
  batch.batch = windows.size();
  batch.seq_len = seq_len;
  batch.features = flat.cols();
  batch.inputs.resize(batch.batch * seq_len * batch.features);
  batch.positions = Matrix(batch.batch, 2);
  batch.source_indices.reserve(batch.batch);
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const Window& w = windows[b];
    if (w.end + 1 < seq_len || w.end >= flat.rows()) {
      throw ShapeError("window ending at " + std::to_string(w.end) + " is out of range");
    }
    const std::size_t first = w.end + 1 - seq_len;
    std::copy_n(flat.row(first).data(), seq_len * batch.features,
                batch.inputs.data() + b * seq_len * batch.features);
    batch.positions(b, 0) = w.position.x;
    batch.positions(b, 1) = w.position.y;
    batch.source_indices.push_back(w.end);
  }
  return batch;
}

// ---------------------------------------------------------------------------

void save_dataset(const CsiDataset& d, const std::filesystem::path& path) {
  d.validate();
  std::vector<unsigned char> out;
  out.reserve(64 + (d.csi.size() + d.positions.size()) * 8);
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kFormatVersion);
  for (const std::size_t dim : d.shape) put<std::uint64_t>(out, dim);
  put<double>(out, d.sample_interval);
  const std::size_t payload_begin = out.size();
  for (const double v : d.csi) put<double>(out, v);
  const std::size_t payload_end = out.size();
  for (const double v : d.positions.data()) put<double>(out, v);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + payload_begin, static_cast<uInt>(payload_end - payload_begin)));
  put<std::uint32_t>(out, crc);

  detail::write_file_atomic(path, out);
}

CsiDataset load_dataset(const std::filesystem::path& path) {
  Reader r(read_file(path));
  if (r.remaining() < 4 || std::memcmp(r.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic, expected CSID", 0);
  }
  r.get<std::uint32_t>("magic");
  const std::size_t version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported version " + std::to_string(version), version_at);
  }
  CsiDataset d;
  const std::size_t dims_at = r.offset();
  for (auto& dim : d.shape) dim = static_cast<std::size_t>(r.get<std::uint64_t>("shape"));
  if (d.shape[2] != 2) {
    throw FormatError("complex axis has length " + std::to_string(d.shape[2]) + ", expected 2",
                      dims_at + 16);
  }
  const std::size_t interval_at = r.offset();
  d.sample_interval = r.get_finite("sampling interval");
  if (!(d.sample_interval > 0.0)) throw FormatError("non-positive sampling interval", interval_at);

  // Guard the element count against overflow before trusting it.
  std::size_t count = 1;
  for (const std::size_t dim : d.shape) {
    if (dim != 0 && count > (std::size_t{1} << 60) / dim) {
      throw FormatError("shape is implausibly large", dims_at);
    }
    count *= dim;
  }
  const std::size_t expected_bytes = count * 8 + d.shape[0] * 16 + 4;
  if (r.remaining() != expected_bytes) {
    throw FormatError("payload size mismatch: shape needs " + std::to_string(count) +
                          " CSI values + " + std::to_string(d.shape[0] * 2) +
                          " position values + CRC (" + std::to_string(expected_bytes) +
                          " bytes), file has " + std::to_string(r.remaining()) + " bytes",
                      r.offset());
  }
  const std::size_t payload_begin = r.offset();
  d.csi.resize(count);
  for (double& v : d.csi) v = r.get_finite("CSI payload");
  const std::size_t payload_end = r.offset();
  std::vector<double> pos(d.shape[0] * 2);
  for (double& v : pos) v = r.get_finite("positions");
  d.positions = Matrix(d.shape[0], 2, std::move(pos));
  const std::size_t crc_at = r.offset();
  const auto stored = r.get<std::uint32_t>("CRC");
  const auto actual = static_cast<std::uint32_t>(
      crc32(0L, r.data() + payload_begin, static_cast<uInt>(payload_end - payload_begin)));
  if (stored != actual) throw FormatError("CRC mismatch", crc_at);
  return d;
}

void save_positions_csv(const Matrix& positions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char line[64];
  for (std::size_t i = 0; i < positions.rows(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", positions(i, 0), positions(i, 1));
    out << line;
  }
}

Matrix load_positions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    double x = 0, y = 0;
    bool ok = comma != std::string::npos;
    if (ok) {
      try {
        std::size_t used = 0;
        x = std::stod(line.substr(0, comma), &used);
        y = std::stod(line.substr(comma + 1));
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (line_no == 1) continue;  // header
      throw FormatError("unparsable position line " + std::to_string(line_no), line_offset);
    }
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw FormatError("non-finite position on line " + std::to_string(line_no), line_offset);
    }
    values.push_back(x);
    values.push_back(y);
  }
  const std::size_t n = values.size() / 2;
  return Matrix(n, 2, std::move(values));
}

}  // namespace chartforge
