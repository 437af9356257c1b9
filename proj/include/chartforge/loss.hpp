// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "chartforge/matrix.hpp"

namespace chartforge {

inline constexpr double kDefaultAlpha = 0.75;

struct TopologyLoss {
  double value = 0.0;
  Matrix grad;  // dL/dE, B x 2
};

/// Mean over ordered pairs i != j of (|p_i - p_j| - |e_i - e_j|)^2. Pairs
/// whose embeddings coincide contribute no gradient.
TopologyLoss topology_loss(const Matrix& positions, const Matrix& embeddings);

struct ReconstructionLoss {
  double value = 0.0;
  std::vector<double> grad;  // dL/dX^
};

/// Mean squared error over all B*L*F entries.
ReconstructionLoss reconstruction_loss(std::span<const double> target,
                                       std::span<const double> reconstruction);

struct LossBreakdown {
  double recon = 0.0;
  double topo = 0.0;
  double total = 0.0;
  double alpha = kDefaultAlpha;
};

struct TotalLoss {
  LossBreakdown parts;
  Matrix d_embed;               // alpha * dtopo/dE
  std::vector<double> d_recon;  // drecon/dX^
};

/// recon + alpha * topo, with gradients routed to both heads.
TotalLoss total_loss(std::span<const double> target, std::span<const double> reconstruction,
                     const Matrix& positions, const Matrix& embeddings, double alpha);

}  // namespace chartforge
