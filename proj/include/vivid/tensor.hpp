// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "vivid/error.hpp"

namespace vivid {

/// Row-major dense matrix. Rows are time steps (or tokens), columns channels.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatD = Mat<double>;
using MatF = Mat<float>;

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "[" + std::to_string(r) + " x " + std::to_string(c) + "]";
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(Errc::shape, std::string(what) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                          shape_str(b.rows(), b.cols()));
  }
}

/// Standard sinusoidal position encoding: even columns sin, odd columns cos,
/// wavelength 10000^(2i/d).
template <typename T>
Mat<T> position_encoding(Eigen::Index length, Eigen::Index width) {
  Mat<T> pe(length, width);
  for (Eigen::Index p = 0; p < length; ++p) {
    for (Eigen::Index c = 0; c < width; ++c) {
      const double i2 = static_cast<double>(c - (c % 2));
      const double angle = static_cast<double>(p) / std::pow(10000.0, i2 / static_cast<double>(width));
      pe(p, c) = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

}  // namespace vivid
