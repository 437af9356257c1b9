// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "chartforge/metrics.hpp"

namespace chartforge {

/// x_true,y_true,x_pred,y_pred
std::string error_vectors_csv(const ErrorVectorSet& vectors);

/// SVG on a fixed 1000 x 1000 viewBox: true points, predicted points, and one
/// <line> per point from truth to prediction. The data-to-view affine map is
/// recorded in a comment after the XML declaration.
std::string error_vectors_svg(const ErrorVectorSet& vectors, std::string_view title);

/// Replaces the file contents (temporary file + rename).
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace chartforge
