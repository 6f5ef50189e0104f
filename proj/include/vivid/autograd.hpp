// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation of one forward pass as a node holding its
// value and a closure that pushes the output gradient back to its inputs.
// Gradients are only allocated and propagated for nodes that (transitively)
// depend on a trainable leaf, so inference passes cost a forward only.
//
// Every op below carries its own hand-derived backward rule; the test suite
// checks each of them against central finite differences in double precision.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vivid/tensor.hpp"

namespace vivid {

/// A named trainable tensor owned by a ParamStore.
template <typename T>
struct Param {
  std::string name;
  Mat<T> value;
};

namespace ag {

template <typename T>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Mat<T>& value() const { return tape_->value(id_); }
  const Mat<T>& grad() const { return tape_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Mat<T> v) { return push(std::move(v), nullptr, false, {}); }

  /// Trainable leaf owning its value (used by gradient checks on raw inputs).
  Var<T> leaf(Mat<T> v) { return push(std::move(v), nullptr, grad_enabled_, {}); }

  /// Binds a parameter without copying it. Repeated binds of the same
  /// parameter return the same node so gradients accumulate in one place.
  Var<T> param(const Param<T>& p, bool trainable = true) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return Var<T>(this, it->second);
    Var<T> v = push(Mat<T>(), &p.value, grad_enabled_ && trainable, {});
    bound_.emplace(&p, v.id());
    return v;
  }

  /// Gradient accumulated for a bound parameter, or nullptr when the
  /// parameter was not used or received no gradient.
  const Mat<T>* param_grad(const Param<T>& p) const {
    auto it = bound_.find(&p);
    if (it == bound_.end()) return nullptr;
    const Node& n = nodes_[it->second];
    if (!n.requires_grad || n.grad.size() == 0) return nullptr;
    return &n.grad;
  }

  Var<T> record(Mat<T> v, bool any_input_requires_grad, Backward bw) {
    const bool rg = grad_enabled_ && any_input_requires_grad;
    return push(std::move(v), nullptr, rg, rg ? std::move(bw) : Backward{});
  }

  const Mat<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.own;
  }

  /// Gradient of node id; empty (0x0) when nothing flowed into it.
  const Mat<T>& grad(std::size_t id) const { return nodes_[id].grad; }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  template <typename Expr>
  void accumulate(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  void backward(const Var<T>& loss) {
    require(loss.rows() == 1 && loss.cols() == 1, Errc::shape, "backward: loss must be a 1x1 scalar");
    Node& root = nodes_[loss.id()];
    if (!root.requires_grad) return;
    root.grad = Mat<T>::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<T> own;
    const Mat<T>* external = nullptr;
    Mat<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var<T> push(Mat<T> v, const Mat<T>* ext, bool rg, Backward bw) {
    nodes_.push_back(Node{std::move(v), ext, Mat<T>(), rg, std::move(bw)});
    return Var<T>(this, nodes_.size() - 1);
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Param<T>*, std::size_t> bound_;
};

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) {
    fail(Errc::shape, "matmul: " + shape_str(a.rows(), a.cols()) + " x " + shape_str(b.rows(), b.cols()));
  }
  Mat<T> out = a.value() * b.value();
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                           if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                         });
}

/// a * b^T.
template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.cols()) {
    fail(Errc::shape, "matmul_nt: " + shape_str(a.rows(), a.cols()) + " x " + shape_str(b.rows(), b.cols()) + "^T");
  }
  Mat<T> out = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
                           if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
                         });
}

/// x * W + b, with b a 1 x out row broadcast over rows.
template <typename T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    fail(Errc::shape, "affine: x " + shape_str(x.rows(), x.cols()) + ", W " + shape_str(w.rows(), w.cols()) +
                          ", b " + shape_str(b.rows(), b.cols()));
  }
  Mat<T> out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  return x.tape().record(std::move(out), rg, [ix = x.id(), iw = w.id(), ib = b.id()](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    if (t.requires_grad(ix)) t.accumulate(ix, g * t.value(iw).transpose());
    if (t.requires_grad(iw)) t.accumulate(iw, t.value(ix).transpose() * g);
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Elementwise and broadcasting

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Mat<T> out = a.value() + b.value();
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id()](Tape<T>& t, std::size_t o) {
                           t.accumulate(ia, t.grad(o));
                           t.accumulate(ib, t.grad(o));
                         });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Mat<T> out = a.value() - b.value();
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id()](Tape<T>& t, std::size_t o) {
                           t.accumulate(ia, t.grad(o));
                           t.accumulate(ib, -t.grad(o));
                         });
}

template <typename T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  Mat<T> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                           if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                         });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Mat<T> out = a.value() * s;
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia = a.id(), s](Tape<T>& t, std::size_t o) { t.accumulate(ia, t.grad(o) * s); });
}

/// a + r with r a 1 x c row broadcast over every row of a.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) fail(Errc::shape, "add_row: row " + shape_str(r.rows(), r.cols()));
  Mat<T> out = a.value();
  out.rowwise() += r.value().row(0);
  return a.tape().record(std::move(out), a.requires_grad() || r.requires_grad(),
                         [ia = a.id(), ir = r.id()](Tape<T>& t, std::size_t o) {
                           t.accumulate(ia, t.grad(o));
                           if (t.requires_grad(ir)) t.accumulate(ir, t.grad(o).colwise().sum());
                         });
}

/// a * r (elementwise) with r a 1 x c row broadcast over rows.
template <typename T>
Var<T> mul_row(const Var<T>& a, const Var<T>& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) fail(Errc::shape, "mul_row: row " + shape_str(r.rows(), r.cols()));
  Mat<T> out = a.value().array().rowwise() * r.value().row(0).array();
  return a.tape().record(std::move(out), a.requires_grad() || r.requires_grad(),
                         [ia = a.id(), ir = r.id()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           if (t.requires_grad(ia)) {
                             Mat<T> ga = g.array().rowwise() * t.value(ir).row(0).array();
                             t.accumulate(ia, ga);
                           }
                           if (t.requires_grad(ir)) t.accumulate(ir, g.cwiseProduct(t.value(ia)).colwise().sum());
                         });
}

/// Row t of a scaled by c(t); c is an L x 1 column.
template <typename T>
Var<T> mul_col(const Var<T>& a, const Var<T>& c) {
  if (c.cols() != 1 || c.rows() != a.rows()) fail(Errc::shape, "mul_col: column " + shape_str(c.rows(), c.cols()));
  Mat<T> out = a.value().array().colwise() * c.value().col(0).array();
  return a.tape().record(std::move(out), a.requires_grad() || c.requires_grad(),
                         [ia = a.id(), ic = c.id()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           if (t.requires_grad(ia)) {
                             Mat<T> ga = g.array().colwise() * t.value(ic).col(0).array();
                             t.accumulate(ia, ga);
                           }
                           if (t.requires_grad(ic)) t.accumulate(ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
                         });
}

namespace detail {

template <typename T, typename F, typename D>
Var<T> unary(const Var<T>& a, F f, D dfdx) {
  Mat<T> out = a.value().unaryExpr(f);
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), dfdx](Tape<T>& t, std::size_t o) {
    Mat<T> ga = t.grad(o).cwiseProduct(t.value(ia).unaryExpr(dfdx));
    t.accumulate(ia, ga);
  });
}

}  // namespace detail

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return detail::unary(
      a, [](T x) { return std::tanh(x); },
      [](T x) {
        const T th = std::tanh(x);
        return T(1) - th * th;
      });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T x) {
        const T s = T(1) / (T(1) + std::exp(-x));
        return s * (T(1) - s);
      });
}

/// GELU, tanh approximation.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T c = static_cast<T>(0.044715);
  return detail::unary(
      a, [](T x) { return T(0.5) * x * (T(1) + std::tanh(k * (x + c * x * x * x))); },
      [](T x) {
        const T th = std::tanh(k * (x + c * x * x * x));
        return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * k * (T(1) + T(3) * c * x * x);
      });
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  return detail::unary(
      a, [](T x) { return x / (T(1) + std::exp(-x)); },
      [](T x) {
        const T s = T(1) / (T(1) + std::exp(-x));
        return s * (T(1) + x * (T(1) - s));
      });
}

// ---------------------------------------------------------------------------
// Structural

/// Stacks a on top of b (temporal concatenation).
template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.cols()) fail(Errc::shape, "concat_rows: column counts differ");
  Mat<T> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id(), ra = a.rows(), rb = b.rows()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           if (t.requires_grad(ia)) t.accumulate(ia, g.topRows(ra));
                           if (t.requires_grad(ib)) t.accumulate(ib, g.bottomRows(rb));
                         });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), Errc::shape, "concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) fail(Errc::shape, "concat_cols: row counts differ");
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Mat<T> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> ids;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    ids.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return parts.front().tape().record(std::move(out), rg, [ids = std::move(ids)](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    Eigen::Index at = 0;
    for (const auto& [id, n] : ids) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(at, n));
      at += n;
    }
  });
}

/// out[r] = a[r - offset] when that row exists and lies in the same segment
/// of `segment` rows (segment 0 means the whole sequence); otherwise zero.
template <typename T>
Var<T> shift_rows(const Var<T>& a, Eigen::Index offset, Eigen::Index segment = 0) {
  const Eigen::Index n = a.rows();
  const Eigen::Index seg = segment > 0 ? segment : n;
  auto source = [n, seg, offset](Eigen::Index r) -> Eigen::Index {
    const Eigen::Index s = r - offset;
    if (s < 0 || s >= n || s / seg != r / seg) return -1;
    return s;
  };
  Mat<T> out = Mat<T>::Zero(n, a.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index s = source(r);
    if (s >= 0) out.row(r) = a.value().row(s);
  }
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), n, source](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    Mat<T> ga = Mat<T>::Zero(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index s = source(r);
      if (s >= 0) ga.row(s) += g.row(r);
    }
    t.accumulate(ia, ga);
  });
}

/// First temporal differences: out[r] = a[r + 1] - a[r].
template <typename T>
Var<T> diff_rows(const Var<T>& a) {
  require(a.rows() >= 2, Errc::shape, "diff_rows: need at least 2 rows");
  const Eigen::Index n = a.rows() - 1;
  Mat<T> out = a.value().bottomRows(n) - a.value().topRows(n);
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), n](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    Mat<T> ga = Mat<T>::Zero(n + 1, g.cols());
    ga.bottomRows(n) += g;
    ga.topRows(n) -= g;
    t.accumulate(ia, ga);
  });
}

/// Mean over non-overlapping windows of k rows: [L x c] -> [L/k x c].
template <typename T>
Var<T> pool_rows(const Var<T>& a, Eigen::Index k) {
  require(k >= 1 && a.rows() % k == 0, Errc::shape,
          "pool_rows: " + std::to_string(a.rows()) + " rows not divisible by window " + std::to_string(k));
  const Eigen::Index m = a.rows() / k;
  Mat<T> out(m, a.cols());
  for (Eigen::Index w = 0; w < m; ++w) out.row(w) = a.value().middleRows(w * k, k).colwise().mean();
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), k, m](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    Mat<T> ga(m * k, g.cols());
    for (Eigen::Index r = 0; r < m * k; ++r) ga.row(r) = g.row(r / k) / static_cast<T>(k);
    t.accumulate(ia, ga);
  });
}

/// Maximum along each row: [L x n] -> [L x 1]. The gradient goes to the
/// first maximal entry.
template <typename T>
Var<T> row_max(const Var<T>& a) {
  const Eigen::Index n = a.rows();
  Mat<T> out(n, 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index c;
    out(r, 0) = a.value().row(r).maxCoeff(&c);
    arg[static_cast<std::size_t>(r)] = c;
  }
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia = a.id(), arg = std::move(arg), cols = a.cols()](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           Mat<T> ga = Mat<T>::Zero(g.rows(), cols);
                           for (Eigen::Index r = 0; r < g.rows(); ++r) ga(r, arg[static_cast<std::size_t>(r)]) = g(r, 0);
                           t.accumulate(ia, ga);
                         });
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

// Backward of y = (x - mean(x)) / s over one group with s treated as
// sqrt(var + eps): dx = (g - mean(g) - y * mean(g*y)) / s.
template <typename G, typename Y>
auto norm_backward(const G& g, const Y& y, double inv_s) {
  const double mg = g.mean();
  const double mgy = g.cwiseProduct(y).mean();
  using S = typename G::Scalar;
  return ((g.array() - static_cast<S>(mg) - y.array() * static_cast<S>(mgy)) * static_cast<S>(inv_s)).matrix().eval();
}

}  // namespace detail

/// Per-row standardization (layer norm without affine).
template <typename T>
Var<T> normalize_rows(const Var<T>& a, T eps) {
  const Mat<T>& x = a.value();
  Mat<T> out(x.rows(), x.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mu = x.row(r).mean();
    const T var = (x.row(r).array() - mu).square().mean();
    inv(r) = T(1) / std::sqrt(var + eps);
    out.row(r) = (x.row(r).array() - mu) * inv(r);
  }
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), inv](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    const Mat<T>& y = t.value(o);
    Mat<T> ga(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) ga.row(r) = detail::norm_backward(g.row(r), y.row(r), inv(r));
    t.accumulate(ia, ga);
  });
}

/// Standardizes all entries of a jointly: (a - mean) / sqrt(var + eps).
template <typename T>
Var<T> standardize(const Var<T>& a, T eps) {
  const Mat<T>& x = a.value();
  const T mu = x.mean();
  const T var = (x.array() - mu).square().mean();
  const T inv = T(1) / std::sqrt(var + eps);
  Mat<T> out = ((x.array() - mu) * inv).matrix();
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), inv](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    const Mat<T>& y = t.value(o);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gv(g.data(), g.size());
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> yv(y.data(), y.size());
    Eigen::Matrix<T, Eigen::Dynamic, 1> gx = detail::norm_backward(gv, yv, inv);
    Mat<T> ga = Eigen::Map<Mat<T>>(gx.data(), g.rows(), g.cols());
    t.accumulate(ia, ga);
  });
}

/// Per-column mean over rows: [L x c] -> [1 x c].
template <typename T>
Var<T> col_mean(const Var<T>& a) {
  Mat<T> out = a.value().colwise().mean();
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), n = a.rows()](Tape<T>& t, std::size_t o) {
    Mat<T> ga = t.grad(o).replicate(n, 1) / static_cast<T>(n);
    t.accumulate(ia, ga);
  });
}

/// Per-column population standard deviation over rows: [L x c] -> [1 x c].
/// Columns with zero spread get a zero gradient.
template <typename T>
Var<T> col_std(const Var<T>& a) {
  const Mat<T>& x = a.value();
  Mat<T> mu = x.colwise().mean();
  Mat<T> centered = x.rowwise() - mu.row(0);
  Mat<T> out = (centered.array().square().colwise().mean()).sqrt().matrix();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia = a.id(), centered = std::move(centered)](Tape<T>& t, std::size_t o) {
                           const Mat<T>& g = t.grad(o);
                           const Mat<T>& s = t.value(o);
                           const T n = static_cast<T>(centered.rows());
                           Mat<T> ga(centered.rows(), centered.cols());
                           for (Eigen::Index c = 0; c < centered.cols(); ++c) {
                             if (s(0, c) > T(1e-12)) {
                               ga.col(c) = centered.col(c) * (g(0, c) / (n * s(0, c)));
                             } else {
                               ga.col(c).setZero();
                             }
                           }
                           t.accumulate(ia, ga);
                         });
}

/// Per-column instance normalization over the temporal axis using the
/// population standard deviation. Columns whose std falls below `guard`
/// are treated as constant and map to zero; `degenerate`, when given,
/// receives the number of such columns.
template <typename T>
Var<T> instance_norm_cols(const Var<T>& a, T guard, int* degenerate = nullptr) {
  const Mat<T>& x = a.value();
  const Eigen::Index n = x.rows();
  Mat<T> out(n, x.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv(x.cols());
  int flat = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const T mu = x.col(c).mean();
    const T sd = std::sqrt((x.col(c).array() - mu).square().mean());
    if (sd < guard) {
      inv(c) = T(0);
      out.col(c).setZero();
      ++flat;
    } else {
      inv(c) = T(1) / sd;
      out.col(c) = (x.col(c).array() - mu) * inv(c);
    }
  }
  if (degenerate != nullptr) *degenerate = flat;
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), inv](Tape<T>& t, std::size_t o) {
    const Mat<T>& g = t.grad(o);
    const Mat<T>& y = t.value(o);
    Mat<T> ga(g.rows(), g.cols());
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      if (inv(c) == T(0)) {
        ga.col(c).setZero();
      } else {
        ga.col(c) = detail::norm_backward(g.col(c), y.col(c), inv(c));
      }
    }
    t.accumulate(ia, ga);
  });
}

// ---------------------------------------------------------------------------
// Attention

/// Multi-head scaled dot-product attention core. q is [Lq x d], k and v are
/// [Lk x d]; heads split the d columns evenly. When `weights` is non-null it
/// receives the per-head [Lq x Lk] attention distributions.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads,
                 std::vector<Mat<T>>* weights = nullptr) {
  const Eigen::Index d = q.cols();
  require(heads >= 1 && d % heads == 0, Errc::shape, "attention: width not divisible by head count");
  require(k.cols() == d && v.cols() == d && k.rows() == v.rows(), Errc::shape, "attention: q/k/v shapes disagree");
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  auto probs = std::make_shared<std::vector<Mat<T>>>();
  probs->reserve(static_cast<std::size_t>(heads));
  Mat<T> out(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dh;
    Mat<T> s = (q.value().middleCols(c0, dh) * k.value().middleCols(c0, dh).transpose()) * scale;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const T m = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - m).exp();
      s.row(r) /= s.row(r).sum();
    }
    out.middleCols(c0, dh) = s * v.value().middleCols(c0, dh);
    probs->push_back(std::move(s));
  }
  if (weights != nullptr) *weights = *probs;
  const bool rg = q.requires_grad() || k.requires_grad() || v.requires_grad();
  return q.tape().record(
      std::move(out), rg,
      [iq = q.id(), ik = k.id(), iv = v.id(), heads, dh, scale, probs](Tape<T>& t, std::size_t o) {
        const Mat<T>& g = t.grad(o);
        const Mat<T>& qv = t.value(iq);
        const Mat<T>& kv = t.value(ik);
        const Mat<T>& vv = t.value(iv);
        Mat<T> gq = Mat<T>::Zero(qv.rows(), qv.cols());
        Mat<T> gk = Mat<T>::Zero(kv.rows(), kv.cols());
        Mat<T> gv = Mat<T>::Zero(vv.rows(), vv.cols());
        for (int h = 0; h < heads; ++h) {
          const Eigen::Index c0 = h * dh;
          const Mat<T>& p = (*probs)[static_cast<std::size_t>(h)];
          const auto gh = g.middleCols(c0, dh);
          Mat<T> dp = gh * vv.middleCols(c0, dh).transpose();
          gv.middleCols(c0, dh).noalias() += p.transpose() * gh;
          Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = dp.cwiseProduct(p).rowwise().sum();
          Mat<T> ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
          gq.middleCols(c0, dh).noalias() += ds * kv.middleCols(c0, dh);
          gk.middleCols(c0, dh).noalias() += ds.transpose() * qv.middleCols(c0, dh);
        }
        t.accumulate(iq, gq);
        t.accumulate(ik, gk);
        t.accumulate(iv, gv);
      });
}

// ---------------------------------------------------------------------------
// Reductions to 1x1 scalars

/// Mean squared difference over all entries.
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "mse");
  const T n = static_cast<T>(a.value().size());
  Mat<T> out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  return a.tape().record(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia = a.id(), ib = b.id(), n](Tape<T>& t, std::size_t o) {
                           const T g = t.grad(o)(0, 0);
                           Mat<T> d = (t.value(ia) - t.value(ib)) * (T(2) * g / n);
                           if (t.requires_grad(ia)) t.accumulate(ia, d);
                           if (t.requires_grad(ib)) t.accumulate(ib, -d);
                         });
}

/// sum(a * w) for a constant weight matrix w.
template <typename T>
Var<T> weighted_sum(const Var<T>& a, const Mat<T>& w) {
  require_same_shape(a.value(), w, "weighted_sum");
  Mat<T> out(1, 1);
  out(0, 0) = a.value().cwiseProduct(w).sum();
  return a.tape().record(std::move(out), a.requires_grad(), [ia = a.id(), w](Tape<T>& t, std::size_t o) {
    t.accumulate(ia, w * t.grad(o)(0, 0));
  });
}

}  // namespace ag
}  // namespace vivid
