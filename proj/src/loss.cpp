// SPDX-License-Identifier: Apache-2.0
#include "chartforge/loss.hpp"

#include <cmath>
#include <string>

#include "chartforge/errors.hpp"

namespace chartforge {

TopologyLoss topology_loss(const Matrix& positions, const Matrix& embeddings) {
  if (positions.cols() != 2 || embeddings.cols() != 2 || positions.rows() != embeddings.rows()) {
    throw ShapeError("topology_loss: positions " + positions.shape_string() + " vs embeddings " +
                     embeddings.shape_string());
  }
  const std::size_t n = positions.rows();
  if (n < 2) {
    throw ConfigError("topology_loss needs at least two samples, got " + std::to_string(n));
  }
  TopologyLoss out{0.0, Matrix(n, 2)};
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  // Each unordered pair stands for two equal ordered-pair terms.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dp = std::hypot(positions(i, 0) - positions(j, 0),
                                   positions(i, 1) - positions(j, 1));
      const double ex = embeddings(i, 0) - embeddings(j, 0);
      const double ey = embeddings(i, 1) - embeddings(j, 1);
      const double de = std::hypot(ex, ey);
      const double diff = dp - de;
      out.value += 2.0 * diff * diff;
      if (de > 0.0) {
        const double scale = -4.0 * norm * diff / de;
        out.grad(i, 0) += scale * ex;
        out.grad(i, 1) += scale * ey;
        out.grad(j, 0) -= scale * ex;
        out.grad(j, 1) -= scale * ey;
      }
    }
  }
  out.value *= norm;
  return out;
}

ReconstructionLoss reconstruction_loss(std::span<const double> target,
                                       std::span<const double> reconstruction) {
  if (target.size() != reconstruction.size()) {
    throw ShapeError("reconstruction_loss: target has " + std::to_string(target.size()) +
                     " entries, reconstruction " + std::to_string(reconstruction.size()));
  }
  if (target.empty()) throw ShapeError("reconstruction_loss: empty input");
  const double inv = 1.0 / static_cast<double>(target.size());
  ReconstructionLoss out{0.0, std::vector<double>(target.size())};
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double r = reconstruction[k] - target[k];
    out.value += r * r;
    out.grad[k] = 2.0 * r * inv;
  }
  out.value *= inv;
  return out;
}

TotalLoss total_loss(std::span<const double> target, std::span<const double> reconstruction,
                     const Matrix& positions, const Matrix& embeddings, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  ReconstructionLoss recon = reconstruction_loss(target, reconstruction);
  TopologyLoss topo = topology_loss(positions, embeddings);
  TotalLoss out;
  out.parts = {recon.value, topo.value, recon.value + alpha * topo.value, alpha};
  out.d_embed = std::move(topo.grad);
  for (double& g : out.d_embed.data()) g *= alpha;
  out.d_recon = std::move(recon.grad);
  return out;
}

}  // namespace chartforge
