// SPDX-License-Identifier: Apache-2.0
#include "chartforge/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "byteio.hpp"

namespace chartforge {

namespace {

constexpr double kView = 1000.0;
constexpr double kMargin = 40.0;

std::string escape_xml(std::string_view text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string error_vectors_csv(const ErrorVectorSet& vectors) {
  std::string out = "x_true,y_true,x_pred,y_pred\n";
  char line[128];
  for (const ErrorVector& v : vectors) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", v.truth.x, v.truth.y,
                  v.predicted.x, v.predicted.y);
    out += line;
  }
  return out;
}

std::string error_vectors_svg(const ErrorVectorSet& vectors, std::string_view title) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  for (const ErrorVector& v : vectors) {
    for (const Vec2 p : {v.truth, v.predicted}) {
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_y = std::max(hi_y, p.y);
    }
  }
  if (vectors.empty()) lo_x = lo_y = 0.0, hi_x = hi_y = 1.0;
  const double extent = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  // Uniform scale, y axis pointing up, data box centred in the view.
  const double sx = (kView - 2.0 * kMargin) / extent;
  const double sy = -sx;
  const double tx = kView / 2.0 - sx * (lo_x + hi_x) / 2.0;
  const double ty = kView / 2.0 - sy * (lo_y + hi_y) / 2.0;

  std::string out;
  char buf[320];
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof buf,
                "<!-- data-to-view: vx = %.17g * x + %.17g; vy = %.17g * y + %.17g -->\n", sx, tx,
                sy, ty);
  out += buf;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\" "
         "viewBox=\"0 0 1000 1000\">\n";
  out += "<title>" + escape_xml(title) + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"1000\" fill=\"white\"/>\n";
  out += "<g id=\"errors\" stroke=\"#999999\" stroke-width=\"1\">\n";
  for (const ErrorVector& v : vectors) {
    std::snprintf(buf, sizeof buf, "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\"/>\n",
                  sx * v.truth.x + tx, sy * v.truth.y + ty, sx * v.predicted.x + tx,
                  sy * v.predicted.y + ty);
    out += buf;
  }
  out += "</g>\n<g id=\"truth\" fill=\"#1f77b4\">\n";
  for (const ErrorVector& v : vectors) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"2.5\"/>\n",
                  sx * v.truth.x + tx, sy * v.truth.y + ty);
    out += buf;
  }
  out += "</g>\n<g id=\"predicted\" fill=\"#d62728\">\n";
  for (const ErrorVector& v : vectors) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"2.5\"/>\n",
                  sx * v.predicted.x + tx, sy * v.predicted.y + ty);
    out += buf;
  }
  out += "</g>\n</svg>\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  detail::write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace chartforge
