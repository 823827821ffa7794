#pragma once

// Reverse-mode automatic differentiation over row-major Eigen matrices.
//
// A Tape records every operation of one forward pass. Each node keeps its
// value and a closure that pushes the node's gradient into its inputs.
// Nodes are appended in evaluation order, so walking the tape backwards is a
// valid topological order. Parameters live outside the tape; their leaf
// nodes accumulate into Parameter::grad, so several backward passes (or
// several tapes) sum their contributions until zero_grad() is called.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kinetrack {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  // Accumulation buffer written by backward passes; not part of the model
  // state, so const models can still be differentiated.
  mutable Matrix<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v, bool is_trainable = true)
      : name(std::move(n)), value(std::move(v)), trainable(is_trainable) {
    grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  }

  Eigen::Index size() const { return value.size(); }
  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  Var() = default;

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  const Matrix<Scalar>& grad() const { return tape_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  friend class Tape<Scalar>;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  // Receives the gradient of the node's output; accumulates into inputs.
  using Backward = std::function<void(Tape&, const Mat&)>;

  /// With grad_enabled = false no closures are stored (inference mode).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, nullptr); }

  Var<Scalar> parameter(const Parameter<Scalar>& p) {
    if (!grad_enabled_ || !p.trainable) return push(p.value, false, nullptr);
    const Parameter<Scalar>* target = &p;
    return push(p.value, true, [target](Tape&, const Mat& g) { target->grad += g; });
  }

  /// Appends an operation result. The closure is dropped when none of the
  /// inputs needs a gradient.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    bool needs = false;
    if (grad_enabled_) {
      for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& inputs, Backward backward) {
    bool needs = false;
    if (grad_enabled_) {
      for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  const Mat& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds g into the gradient buffer of node `id` (no-op for constants).
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    n.grad += g;
  }

  void backward(const Var<Scalar>& loss) {
    if (loss.tape_ != this) throw std::logic_error("backward: variable belongs to another tape");
    const Mat& v = nodes_[loss.id_].value;
    if (v.rows() != 1 || v.cols() != 1) {
      throw ShapeError("backward: loss must be a scalar, got " + shape_string(v.rows(), v.cols()));
    }
    for (auto& n : nodes_) {
      if (n.requires_grad) n.grad.setZero(n.value.rows(), n.value.cols());
    }
    if (!nodes_[loss.id_].requires_grad) return;
    nodes_[loss.id_].grad(0, 0) = Scalar(1);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward) n.backward(*this, n.grad);
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool requires_grad = false;
  };

  Var<Scalar> push(Mat value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Mat{}, std::move(backward), requires_grad});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) +
                     " vs " + shape_string(b.rows(), b.cols()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.rows(), a.cols()) + " * " +
                     shape_string(b.rows(), b.cols()));
  }
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// a * b^T without materializing the transpose on the tape.
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: shape mismatch " + shape_string(a.rows(), a.cols()) + " * " +
                     shape_string(b.rows(), b.cols()) + "^T");
  }
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().transpose();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g.transpose());
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

/// Hadamard product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value() * s;
  return a.tape().record(std::move(out), {a}, [ia, s](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g * s);
  });
}

/// a + c where c is a constant of the same shape.
template <typename Scalar>
Var<Scalar> add_constant(const Var<Scalar>& a, const Matrix<Scalar>& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw ShapeError("add_constant: shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(c.rows(), c.cols()));
  }
  const auto ia = a.id();
  Matrix<Scalar> out = a.value() + c;
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g);
  });
}

/// Broadcasts a 1 x cols row over every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_string(a.rows(), a.cols()) + " + row " +
                     shape_string(row.rows(), row.cols()));
  }
  const auto ia = a.id(), ir = row.id();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  });
  const auto io = a.tape().size();
  return a.tape().record(std::move(out), {a}, [ia, io](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& y = t.value(io);
    t.accumulate(ia, g.cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix())));
  });
}

/// Exact (erf-based) GELU.
template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& a) {
  const auto ia = a.id();
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  Matrix<Scalar> out = a.value().unaryExpr(
      [inv_sqrt2](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::erf(x * inv_sqrt2)); });
  return a.tape().record(std::move(out), {a}, [ia, inv_sqrt2](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Scalar inv_sqrt_2pi = Scalar(0.3989422804014327);
    Matrix<Scalar> d = t.value(ia).unaryExpr([&](Scalar x) {
      return Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2)) +
             x * inv_sqrt_2pi * std::exp(Scalar(-0.5) * x * x);
    });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

/// Elementwise clamp into [lo, hi]; the gradient passes only strictly inside.
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& a, Scalar lo, Scalar hi) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record(std::move(out), {a}, [ia, lo, hi](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& x = t.value(ia);
    Matrix<Scalar> masked = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!(x.data()[i] > lo && x.data()[i] < hi)) masked.data()[i] = Scalar(0);
    }
    t.accumulate(ia, masked);
  });
}

/// Inverted dropout; identity when rate == 0.
template <typename Scalar, typename Rng>
Var<Scalar> dropout(const Var<Scalar>& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix<Scalar> mask(a.rows(), a.cols());
  const Scalar s = Scalar(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : Scalar(0);
  Matrix<Scalar> out = a.value().cwiseProduct(mask);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, mask](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g.cwiseProduct(mask));
  });
}

// ---------------------------------------------------------------------------
// Structural

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(rows, parts.front().cols()) +
                       " vs " + shape_string(p.rows(), p.cols()));
    }
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    c += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts,
                                     [spans](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                       Eigen::Index c0 = 0;
                                       for (const auto& [id, width] : spans) {
                                         t.accumulate(id, g.middleCols(c0, width));
                                         c0 += width;
                                       }
                                     });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_string(parts.front().rows(), cols) +
                       " vs " + shape_string(p.rows(), p.cols()));
    }
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    r += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts,
                                     [spans](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                       Eigen::Index r0 = 0;
                                       for (const auto& [id, height] : spans) {
                                         t.accumulate(id, g.middleRows(r0, height));
                                         r0 += height;
                                       }
                                     });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + shape_string(a.rows(), a.cols()));
  }
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.tape().record(std::move(out), {a}, [ia, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(t.value(ia).rows(), t.value(ia).cols());
    full.middleCols(start, count) = g;
    t.accumulate(ia, full);
  });
}

template <typename Scalar>
Var<Scalar> select_row(const Var<Scalar>& a, Eigen::Index r) {
  if (r < 0 || r >= a.rows()) {
    throw ShapeError("select_row: row " + std::to_string(r) + " out of " +
                     shape_string(a.rows(), a.cols()));
  }
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().row(r);
  return a.tape().record(std::move(out), {a}, [ia, r](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(t.value(ia).rows(), t.value(ia).cols());
    full.row(r) = g.row(0);
    t.accumulate(ia, full);
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, Matrix<Scalar>::Constant(t.value(ia).rows(), t.value(ia).cols(), g(0, 0)));
  });
}

/// Column sums: [n x d] -> [1 x d].
template <typename Scalar>
Var<Scalar> sum_rows(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().colwise().sum();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ia, g.replicate(t.value(ia).rows(), 1));
  });
}

/// Column means: [n x d] -> [1 x d].
template <typename Scalar>
Var<Scalar> mean_rows(const Var<Scalar>& a) {
  return scale(sum_rows(a), Scalar(1) / Scalar(a.rows()));
}

// ---------------------------------------------------------------------------
// Normalization

/// Row-wise softmax with max subtraction.
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  if (a.cols() < 1) throw ShapeError("softmax_rows: empty last dimension");
  const auto ia = a.id();
  Matrix<Scalar> out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const auto x = a.value().row(r);
    auto y = out.row(r);
    y = (x.array() - x.maxCoeff()).exp().matrix();
    y /= y.sum();
  }
  const auto io = a.tape().size();
  return a.tape().record(std::move(out), {a}, [ia, io](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const auto& y = t.value(io);
    Matrix<Scalar> gy = g.cwiseProduct(y);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = gy.rowwise().sum();
    Matrix<Scalar> ga = gy - (y.array().colwise() * dots.array()).matrix();
    t.accumulate(ia, ga);
  });
}

inline constexpr double kLayerNormEps = 1e-5;

/// Per-row layer normalization followed by the affine map (gain, bias),
/// both 1 x d rows.
template <typename Scalar>
Var<Scalar> layer_norm_rows(const Var<Scalar>& x, const Var<Scalar>& gain, const Var<Scalar>& bias,
                            Scalar eps = Scalar(kLayerNormEps)) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ShapeError("layer_norm_rows: affine shape mismatch for input " + shape_string(n, d));
  }
  Matrix<Scalar> xhat(n, d);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = x.value().row(r);
    const Scalar mu = row.mean();
    const Scalar var = (row.array() - mu).square().mean();
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (row.array() - mu) * inv_std(r);
  }
  Matrix<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  const auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [ix, ig, ib, xhat, inv_std](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
        if (!t.requires_grad(ix)) return;
        const Matrix<Scalar> gx_hat = (g.array().rowwise() * t.value(ig).row(0).array()).matrix();
        const Scalar inv_d = Scalar(1) / Scalar(gx_hat.cols());
        Matrix<Scalar> gx(gx_hat.rows(), gx_hat.cols());
        for (Eigen::Index r = 0; r < gx.rows(); ++r) {
          const Scalar m1 = gx_hat.row(r).sum() * inv_d;
          const Scalar m2 = gx_hat.row(r).dot(xhat.row(r)) * inv_d;
          gx.row(r) = inv_std(r) * (gx_hat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
        }
        t.accumulate(ix, gx);
      });
}

// ---------------------------------------------------------------------------
// Channel-wise gather with linear interpolation along the token axis.

/// out[i, j] = E[., j] linearly interpolated at real position idx[i, j].
/// Positions are expected in [0, n-1]; values outside read the nearest
/// boundary segment (extrapolation is the caller's problem, so clamp first).
/// Differentiable with respect to both e and idx.
template <typename Scalar>
Var<Scalar> gather_interp(const Var<Scalar>& e, const Var<Scalar>& idx) {
  detail::require_same_shape("gather_interp", e, idx);
  const Eigen::Index n = e.rows(), d = e.cols();
  const auto& ev = e.value();
  const auto& pv = idx.value();
  Matrix<Scalar> out(n, d);
  // lower index per entry; upper = lower + 1 (or lower when n == 1)
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> lower(n, d);
  Matrix<Scalar> frac(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Scalar p = pv(i, j);
      Eigen::Index i0 = 0;
      Scalar f = Scalar(0);
      if (n > 1) {
        i0 = static_cast<Eigen::Index>(std::floor(p));
        if (i0 < 0) i0 = 0;
        if (i0 > n - 2) i0 = n - 2;
        f = p - Scalar(i0);
      }
      const Eigen::Index i1 = n > 1 ? i0 + 1 : 0;
      lower(i, j) = i0;
      frac(i, j) = f;
      out(i, j) = ev(i0, j) * (Scalar(1) - f) + ev(i1, j) * f;
    }
  }
  const auto ie = e.id(), ip = idx.id();
  return e.tape().record(std::move(out), {e, idx},
                         [ie, ip, lower, frac, n, d](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                           const auto& ev = t.value(ie);
                           Matrix<Scalar> ge = Matrix<Scalar>::Zero(n, d);
                           Matrix<Scalar> gp = Matrix<Scalar>::Zero(n, d);
                           for (Eigen::Index i = 0; i < n; ++i) {
                             for (Eigen::Index j = 0; j < d; ++j) {
                               const Eigen::Index i0 = lower(i, j);
                               const Eigen::Index i1 = n > 1 ? i0 + 1 : 0;
                               const Scalar f = frac(i, j);
                               ge(i0, j) += g(i, j) * (Scalar(1) - f);
                               ge(i1, j) += g(i, j) * f;
                               gp(i, j) = n > 1 ? g(i, j) * (ev(i1, j) - ev(i0, j)) : Scalar(0);
                             }
                           }
                           t.accumulate(ie, ge);
                           t.accumulate(ip, gp);
                         });
}

// ---------------------------------------------------------------------------
// Loss

/// Elementwise smooth-L1: 0.5 x^2 if |x| < 1 else |x| - 0.5.
template <typename Scalar>
Scalar smooth_l1(Scalar x) {
  const Scalar ax = std::abs(x);
  return ax < Scalar(1) ? Scalar(0.5) * x * x : ax - Scalar(0.5);
}

template <typename Scalar>
Scalar smooth_l1_grad(Scalar x) {
  if (x >= Scalar(1)) return Scalar(1);
  if (x <= Scalar(-1)) return Scalar(-1);
  return x;
}

/// Sum of smooth-L1 over the columns of each row, averaged over rows.
template <typename Scalar>
Var<Scalar> smooth_l1_loss(const Var<Scalar>& pred, const Matrix<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("smooth_l1_loss: shape mismatch " + shape_string(pred.rows(), pred.cols()) +
                     " vs " + shape_string(target.rows(), target.cols()));
  }
  const Matrix<Scalar> residual = pred.value() - target;
  const Scalar inv_batch = Scalar(1) / Scalar(pred.rows());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = residual.unaryExpr([](Scalar x) { return smooth_l1(x); }).sum() * inv_batch;
  const auto ip = pred.id();
  return pred.tape().record(std::move(out), {pred},
                            [ip, residual, inv_batch](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                              t.accumulate(ip, residual.unaryExpr([](Scalar x) {
                                return smooth_l1_grad(x);
                              }) * (g(0, 0) * inv_batch));
                            });
}

}  // namespace kinetrack
