// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "vivid/tensor.hpp"

namespace vivid {

/// Line chart of selected channels over frames, as a standalone SVG.
inline std::string svg_channel_plot(const MatD& frames, const std::vector<Eigen::Index>& channels,
                                    const std::string& title, double fps = 30.0) {
  require(frames.rows() >= 2, Errc::shape, "plot: need at least 2 frames");
  for (auto c : channels) {
    require(c >= 0 && c < frames.cols(), Errc::usage, "plot: channel " + std::to_string(c) + " out of range");
  }
  constexpr double W = 720, H = 360, left = 56, right = 140, top = 32, bottom = 40;
  double lo = 0, hi = 0;
  bool first = true;
  for (auto c : channels) {
    const double mn = frames.col(c).minCoeff(), mx = frames.col(c).maxCoeff();
    lo = first ? mn : std::min(lo, mn);
    hi = first ? mx : std::max(hi, mx);
    first = false;
  }
  if (hi - lo < 1e-9) {
    lo -= 1;
    hi += 1;
  }
  const double pw = W - left - right, ph = H - top - bottom;
  const auto n = frames.rows();
  auto x_of = [&](Eigen::Index r) { return left + pw * static_cast<double>(r) / static_cast<double>(n - 1); };
  auto y_of = [&](double v) { return top + ph * (hi - v) / (hi - lo); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};

  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" viewBox=\"0 0 %g %g\">\n", W, H,
                W, H);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">", left);
  s += buf;
  for (char ch : title) {
    if (ch == '<') s += "&lt;";
    else if (ch == '>') s += "&gt;";
    else if (ch == '&') s += "&amp;";
    else s += ch;
  }
  s += "</text>\n";
  std::snprintf(buf, sizeof(buf), "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#888\"/>\n",
                left, top, pw, ph);
  s += buf;
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">%.3g</text>\n",
                  left - 4, y_of(v) + 3, v);
    s += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">time (s), "
                "%.3g s total</text>\n",
                left + pw / 2, H - 10, static_cast<double>(n - 1) / fps);
  s += buf;
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const char* color = palette[k % (sizeof(palette) / sizeof(palette[0]))];
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"";
    s += color;
    s += "\" points=\"";
    for (Eigen::Index r = 0; r < n; ++r) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x_of(r), y_of(frames(r, channels[k])));
      s += buf;
    }
    s += "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" fill=\"%s\">channel %ld</text>\n",
                  W - right + 10, top + 14.0 * (static_cast<double>(k) + 1), color, static_cast<long>(channels[k]));
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

/// Frame table: header "frame,c0,...,c55" then one row per frame.
inline std::string frames_csv(const MatD& frames) {
  std::string s = "frame";
  for (Eigen::Index c = 0; c < frames.cols(); ++c) s += ",c" + std::to_string(c);
  s += "\n";
  char buf[40];
  for (Eigen::Index r = 0; r < frames.rows(); ++r) {
    s += std::to_string(r);
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), ",%.9g", frames(r, c));
      s += buf;
    }
    s += "\n";
  }
  return s;
}

}  // namespace vivid
