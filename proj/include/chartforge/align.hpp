// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "chartforge/matrix.hpp"

namespace chartforge {

/// 3 x 2 map acting on homogeneous row vectors: [x y 1] * T.
struct AffineTransform {
  Matrix t = Matrix(3, 2);

  static AffineTransform identity();
  /// Linear part A (2x2, applied as row * A) and translation.
  static AffineTransform from_parts(const Matrix& linear, double tx, double ty);

  std::string to_json() const;
  std::string to_csv() const;
  static AffineTransform from_json(const std::string& text);
};

enum class ChartFrame { Latent, Meters };

/// N x 2 chart coordinates. Aligned charts are always in meters.
class ChartEmbedding {
 public:
  static ChartEmbedding latent(Matrix coords);
  static ChartEmbedding meters(Matrix coords);

  const Matrix& coords() const { return coords_; }
  bool aligned() const { return frame_ == ChartFrame::Meters; }
  ChartFrame frame() const { return frame_; }

 private:
  ChartEmbedding(Matrix coords, ChartFrame frame);
  Matrix coords_;
  ChartFrame frame_;
};

/// Least-squares T minimizing |P - [E | 1] T|_F, solved by Householder QR on
/// the N x 3 design matrix. Throws DegenerateGeometryError when [E | 1] is
/// rank deficient and ShapeError for N < 3 or mismatched rows.
AffineTransform fit_affine(const Matrix& positions, const Matrix& embeddings);

/// [E | 1] T, flagged as aligned.
ChartEmbedding apply_affine(const Matrix& embeddings, const AffineTransform& transform);

/// [E | 1]^T (P - [E | 1] T), the normal-equation residual (3 x 2).
Matrix normal_equation_residual(const Matrix& positions, const Matrix& embeddings,
                                const AffineTransform& transform);

}  // namespace chartforge
