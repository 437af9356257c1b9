// SPDX-License-Identifier: Apache-2.0
#include "chartforge/align.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "chartforge/errors.hpp"

namespace chartforge {

AffineTransform AffineTransform::identity() {
  AffineTransform a;
  a.t(0, 0) = 1.0;
  a.t(1, 1) = 1.0;
  return a;
}

AffineTransform AffineTransform::from_parts(const Matrix& linear, double tx, double ty) {
  if (linear.rows() != 2 || linear.cols() != 2) {
    throw ShapeError("affine linear part must be 2x2, got " + linear.shape_string());
  }
  AffineTransform a;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) a.t(i, j) = linear(i, j);
  }
  a.t(2, 0) = tx;
  a.t(2, 1) = ty;
  return a;
}

std::string AffineTransform::to_json() const {
  nlohmann::json j;
  j["T"] = {{t(0, 0), t(0, 1)}, {t(1, 0), t(1, 1)}, {t(2, 0), t(2, 1)}};
  return j.dump(2);
}

std::string AffineTransform::to_csv() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "t00,t01,t10,t11,t20,t21\n%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                t(0, 0), t(0, 1), t(1, 0), t(1, 1), t(2, 0), t(2, 1));
  return buf;
}

AffineTransform AffineTransform::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto& rows = j.at("T");
  if (rows.size() != 3) throw ShapeError("affine JSON must hold a 3x2 matrix");
  AffineTransform a;
  for (std::size_t i = 0; i < 3; ++i) {
    if (rows[i].size() != 2) throw ShapeError("affine JSON must hold a 3x2 matrix");
    for (std::size_t k = 0; k < 2; ++k) a.t(i, k) = rows[i][k].get<double>();
  }
  return a;
}

ChartEmbedding::ChartEmbedding(Matrix coords, ChartFrame frame)
    : coords_(std::move(coords)), frame_(frame) {
  if (coords_.cols() != 2) {
    throw ShapeError("chart embeddings must be N x 2, got " + coords_.shape_string());
  }
}

ChartEmbedding ChartEmbedding::latent(Matrix coords) {
  return ChartEmbedding(std::move(coords), ChartFrame::Latent);
}

ChartEmbedding ChartEmbedding::meters(Matrix coords) {
  return ChartEmbedding(std::move(coords), ChartFrame::Meters);
}

AffineTransform fit_affine(const Matrix& positions, const Matrix& embeddings) {
  if (positions.cols() != 2 || embeddings.cols() != 2 || positions.rows() != embeddings.rows()) {
    throw ShapeError("fit_affine: positions " + positions.shape_string() + " vs embeddings " +
                     embeddings.shape_string());
  }
  const std::size_t n = positions.rows();
  if (n < 3) throw ShapeError("fit_affine needs at least 3 point pairs, got " + std::to_string(n));

  // Design matrix A = [E | 1] (n x 3) and right-hand side B = P (n x 2),
  // column-major copies for the Householder sweep.
  std::array<std::vector<double>, 3> a;
  for (std::size_t j = 0; j < 2; ++j) {
    a[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) a[j][i] = embeddings(i, j);
  }
  a[2].assign(n, 1.0);
  std::array<std::vector<double>, 2> b;
  for (std::size_t j = 0; j < 2; ++j) {
    b[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) b[j][i] = positions(i, j);
  }
  double scale = 0.0;
  for (const auto& col : a) {
    for (const double v : col) scale = std::max(scale, std::abs(v));
  }

  std::array<double, 3> r_diag{};
  for (std::size_t k = 0; k < 3; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a[k][i] * a[k][i];
    norm = std::sqrt(norm);
    if (!(norm > 1e-10 * scale * std::sqrt(static_cast<double>(n)))) {
      throw DegenerateGeometryError(
          "fit_affine: embedding points are collinear or coincident (design matrix rank < 3)");
    }
    const double alpha = a[k][k] > 0 ? -norm : norm;
    // v = x - alpha e1, stored in place.
    std::vector<double> v(a[k].begin() + static_cast<std::ptrdiff_t>(k), a[k].end());
    v[0] -= alpha;
    double vv = 0.0;
    for (const double x : v) vv += x * x;
    auto reflect = [&](std::vector<double>& col) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i - k] * col[i];
      s = 2.0 * s / vv;
      for (std::size_t i = k; i < n; ++i) col[i] -= s * v[i - k];
    };
    for (std::size_t j = k; j < 3; ++j) reflect(a[j]);
    for (auto& col : b) reflect(col);
    r_diag[k] = a[k][k];
  }

  // Back substitution R T = Q^T B on the leading 3 rows.
  AffineTransform out;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 3; k-- > 0;) {
      double s = b[c][k];
      for (std::size_t j = k + 1; j < 3; ++j) s -= a[j][k] * out.t(j, c);
      out.t(k, c) = s / r_diag[k];
    }
  }
  if (!all_finite(out.t.data())) {
    throw DegenerateGeometryError("fit_affine: solution is not finite");
  }
  return out;
}

ChartEmbedding apply_affine(const Matrix& embeddings, const AffineTransform& transform) {
  if (embeddings.cols() != 2) {
    throw ShapeError("apply_affine: embeddings must be N x 2, got " + embeddings.shape_string());
  }
  const Matrix& t = transform.t;
  Matrix out(embeddings.rows(), 2);
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const double x = embeddings(i, 0), y = embeddings(i, 1);
    out(i, 0) = x * t(0, 0) + y * t(1, 0) + t(2, 0);
    out(i, 1) = x * t(0, 1) + y * t(1, 1) + t(2, 1);
  }
  return ChartEmbedding::meters(std::move(out));
}

Matrix normal_equation_residual(const Matrix& positions, const Matrix& embeddings,
                                const AffineTransform& transform) {
  const Matrix fitted = apply_affine(embeddings, transform).coords();
  Matrix out(3, 2);
  for (std::size_t i = 0; i < positions.rows(); ++i) {
    const double row[3] = {embeddings(i, 0), embeddings(i, 1), 1.0};
    for (std::size_t c = 0; c < 2; ++c) {
      const double r = positions(i, c) - fitted(i, c);
      for (std::size_t k = 0; k < 3; ++k) out(k, c) += row[k] * r;
    }
  }
  return out;
}

}  // namespace chartforge
