// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "chartforge/matrix.hpp"

namespace chartforge {

struct PowerIterationOptions {
  std::size_t max_iterations = 2000;
  double tolerance = 1e-11;  // on the change of the normalized eigenvector
  std::uint64_t seed = 0x3d5;
};

/// Leading `count` eigenpairs of a symmetric matrix by power iteration with
/// Hotelling deflation. Eigenvectors are unit columns of the returned
/// matrix; eigenvalues are written to `values`.
Matrix top_eigenvectors(const Matrix& symmetric, std::size_t count, std::vector<double>& values,
                        const PowerIterationOptions& options = {});

/// Classical multidimensional scaling of the rows of `features` into two
/// dimensions: double-centred squared Euclidean distances, top-2 eigenpairs,
/// coordinates v * sqrt(max(lambda, 0)).
Matrix classical_mds(const Matrix& features, const PowerIterationOptions& options = {});

}  // namespace chartforge
