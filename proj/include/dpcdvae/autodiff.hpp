// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation of one forward pass; backward()
// walks it in reverse and accumulates gradients into leaf nodes.

#ifndef DPCDVAE_AUTODIFF_HPP_
#define DPCDVAE_AUTODIFF_HPP_

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace dpcdvae::ad {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  // With recording off no backward closures are stored (inference mode).
  explicit Tape(bool recording = true) : recording_(recording) { nodes_.reserve(256); }

  Var constant(Tensor v) { return push(std::move(v), false, {}); }
  Var leaf(Tensor v) { return push(std::move(v), recording_, {}); }

  bool recording() const { return recording_; }

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // Adds g into the gradient slot of node id (allocating on first use).
  template <class Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad)
      return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  Var push(Tensor v, bool needs_grad, Backward bw) {
    nodes_.push_back({std::move(v), Tensor(), needs_grad && recording_,
                      recording_ ? std::move(bw) : Backward{}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1)
      throw InvalidInput("backward() needs a scalar root");
    if (!recording_)
      throw InvalidInput("backward() on a non-recording tape");
    nodes_[root.id()].grad = Tensor::Ones(1, 1);
    for (int i = root.id(); i >= 0; --i) {
      current_ = i;
      Node& n = nodes_[i];
      if (n.needs_grad && n.backward && n.grad.size() > 0)
        n.backward(*this);
    }
  }

  // Gradient of the node whose backward closure is running.
  const Tensor& upstream() const { return nodes_[current_].grad; }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
  int current_ = -1;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Tensor& Var::grad() const { return tape_->grad(id_); }

namespace detail {

inline bool any_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs)
    if (v.tape()->needs_grad(v.id()))
      return true;
  return false;
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput(std::string(op) + ": shape mismatch");
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

}  // namespace detail

// ---- linear algebra --------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw InvalidInput("matmul: inner dimension mismatch");
  Tape& t = *a.tape();
  int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), detail::any_grad({a, b}), [ia, ib](Tape& tp) {
    const Tensor& g = tp.upstream();
    if (tp.needs_grad(ia))
      tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib))
      tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

// a * m for a constant matrix m.
inline Var matmul_const(const Var& a, const Tensor& m) {
  if (a.cols() != m.rows())
    throw InvalidInput("matmul_const: inner dimension mismatch");
  Tape& t = *a.tape();
  int ia = a.id();
  return t.push(a.value() * m, detail::any_grad({a}), [ia, m](Tape& tp) {
    tp.accumulate(ia, tp.upstream() * m.transpose());
  });
}

// a (n x k) + b (1 x k) broadcast over rows.
inline Var add_row(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw InvalidInput("add_row: bias shape mismatch");
  Tape& t = *a.tape();
  int ia = a.id(), ib = b.id();
  Tensor v = a.value();
  v.rowwise() += b.value().row(0);
  return t.push(std::move(v), detail::any_grad({a, b}), [ia, ib](Tape& tp) {
    const Tensor& g = tp.upstream();
    tp.accumulate(ia, g);
    if (tp.needs_grad(ib))
      tp.accumulate(ib, g.colwise().sum());
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), detail::any_grad({a, b}), [ia, ib](Tape& tp) {
    tp.accumulate(ia, tp.upstream());
    tp.accumulate(ib, tp.upstream());
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), detail::any_grad({a, b}), [ia, ib](Tape& tp) {
    tp.accumulate(ia, tp.upstream());
    tp.accumulate(ib, -tp.upstream());
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  int ia = a.id(), ib = b.id();
  Tensor v = a.value().cwiseProduct(b.value());
  return t.push(std::move(v), detail::any_grad({a, b}), [ia, ib](Tape& tp) {
    const Tensor& g = tp.upstream();
    if (tp.needs_grad(ia))
      tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    if (tp.needs_grad(ib))
      tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  int ia = a.id();
  return t.push(a.value() * s, detail::any_grad({a}),
                [ia, s](Tape& tp) { tp.accumulate(ia, tp.upstream() * s); });
}

// Elementwise product with a constant of the same shape.
inline Var mul_const(const Var& a, const Tensor& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols())
    throw InvalidInput("mul_const: shape mismatch");
  Tape& t = *a.tape();
  int ia = a.id();
  return t.push(a.value().cwiseProduct(c), detail::any_grad({a}),
                [ia, c](Tape& tp) { tp.accumulate(ia, tp.upstream().cwiseProduct(c)); });
}

// a (n x k) scaled row-wise by column c (n x 1).
inline Var mul_rows(const Var& a, const Var& c) {
  if (c.cols() != 1 || c.rows() != a.rows())
    throw InvalidInput("mul_rows: expected an n x 1 multiplier");
  Tape& t = *a.tape();
  int ia = a.id(), ic = c.id();
  Tensor v = a.value().array().colwise() * c.value().col(0).array();
  return t.push(std::move(v), detail::any_grad({a, c}), [ia, ic](Tape& tp) {
    const Tensor& g = tp.upstream();
    if (tp.needs_grad(ia))
      tp.accumulate(ia, Tensor(g.array().colwise() * tp.value(ic).col(0).array()));
    if (tp.needs_grad(ic))
      tp.accumulate(ic, Tensor(g.cwiseProduct(tp.value(ia)).rowwise().sum()));
  });
}

// ---- pointwise nonlinearities ---------------------------------------------

template <class F, class DF>
Var pointwise(const Var& a, F f, DF df) {
  Tape& t = *a.tape();
  int ia = a.id();
  Tensor v = a.value().unaryExpr(f);
  return t.push(std::move(v), detail::any_grad({a}), [ia, df](Tape& tp) {
    tp.accumulate(ia, Tensor(tp.upstream().cwiseProduct(tp.value(ia).unaryExpr(df))));
  });
}

inline Var silu(const Var& a) {
  return pointwise(
      a, [](double x) { return x * detail::sigmoid(x); },
      [](double x) {
        double s = detail::sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

inline Var sigmoid(const Var& a) {
  return pointwise(
      a, [](double x) { return detail::sigmoid(x); },
      [](double x) {
        double s = detail::sigmoid(x);
        return s * (1.0 - s);
      });
}

inline Var softplus(const Var& a) {
  return pointwise(
      a, [](double x) { return detail::softplus(x); },
      [](double x) { return detail::sigmoid(x); });
}

inline Var exp(const Var& a) {
  return pointwise(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

inline Var square(const Var& a) {
  return pointwise(
      a, [](double x) { return x * x; }, [](double x) { return 2 * x; });
}

inline Var add_scalar(const Var& a, double s) {
  Tape& t = *a.tape();
  int ia = a.id();
  return t.push(Tensor(a.value().array() + s), detail::any_grad({a}),
                [ia](Tape& tp) { tp.accumulate(ia, tp.upstream()); });
}

// ---- shape manipulation ---------------------------------------------------

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty())
    throw InvalidInput("concat_cols: no inputs");
  Tape& t = *parts[0].tape();
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool grad = false;
  for (const Var& p : parts) {
    if (p.rows() != rows)
      throw InvalidInput("concat_cols: row mismatch");
    cols += p.cols();
    grad = grad || t.needs_grad(p.id());
  }
  Tensor v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;  // (id, width)
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    c += p.cols();
  }
  return t.push(std::move(v), grad, [spans](Tape& tp) {
    const Tensor& g = tp.upstream();
    Eigen::Index c = 0;
    for (auto [id, w] : spans) {
      if (tp.needs_grad(id))
        tp.accumulate(id, g.middleCols(c, w));
      c += w;
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols())
    throw InvalidInput("slice_cols: out of range");
  Tape& t = *a.tape();
  int ia = a.id();
  Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().middleCols(start, count), detail::any_grad({a}),
                [ia, rows, cols, start, count](Tape& tp) {
                  Tensor g = Tensor::Zero(rows, cols);
                  g.middleCols(start, count) = tp.upstream();
                  tp.accumulate(ia, g);
                });
}

// out[i] = a[index[i]]
inline Var gather_rows(const Var& a, const std::vector<int>& index) {
  Tape& t = *a.tape();
  int ia = a.id();
  Tensor v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (size_t i = 0; i < index.size(); ++i)
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  Eigen::Index rows = a.rows();
  return t.push(std::move(v), detail::any_grad({a}), [ia, index, rows](Tape& tp) {
    const Tensor& g = tp.upstream();
    Tensor ga = Tensor::Zero(rows, g.cols());
    for (size_t i = 0; i < index.size(); ++i)
      ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    tp.accumulate(ia, ga);
  });
}

// out[index[i]] += a[i], out has `rows` rows.
inline Var scatter_add_rows(const Var& a, const std::vector<int>& index, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows())
    throw InvalidInput("scatter_add_rows: index length mismatch");
  Tape& t = *a.tape();
  int ia = a.id();
  Tensor v = Tensor::Zero(rows, a.cols());
  for (size_t i = 0; i < index.size(); ++i)
    v.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  return t.push(std::move(v), detail::any_grad({a}), [ia, index](Tape& tp) {
    const Tensor& g = tp.upstream();
    Tensor ga(static_cast<Eigen::Index>(index.size()), g.cols());
    for (size_t i = 0; i < index.size(); ++i)
      ga.row(static_cast<Eigen::Index>(i)) = g.row(index[i]);
    tp.accumulate(ia, ga);
  });
}

inline Var mean_rows(const Var& a) {
  Tape& t = *a.tape();
  int ia = a.id();
  Eigen::Index rows = a.rows();
  return t.push(a.value().colwise().mean(), detail::any_grad({a}), [ia, rows](Tape& tp) {
    Tensor g = tp.upstream().replicate(rows, 1) / static_cast<double>(rows);
    tp.accumulate(ia, g);
  });
}

// 1 x k -> rows x k
inline Var broadcast_rows(const Var& a, Eigen::Index rows) {
  if (a.rows() != 1)
    throw InvalidInput("broadcast_rows: expected a single row");
  Tape& t = *a.tape();
  int ia = a.id();
  return t.push(a.value().replicate(rows, 1), detail::any_grad({a}),
                [ia](Tape& tp) { tp.accumulate(ia, tp.upstream().colwise().sum()); });
}

// ---- reductions and losses --------------------------------------------------

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  int ia = a.id();
  Eigen::Index r = a.rows(), c = a.cols();
  return t.push(Tensor::Constant(1, 1, a.value().sum()), detail::any_grad({a}),
                [ia, r, c](Tape& tp) { tp.accumulate(ia, Tensor::Constant(r, c, tp.upstream()(0, 0))); });
}

// Weighted sum of scalar (1x1) terms.
inline Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size() || terms.empty())
    throw InvalidInput("weighted_sum: size mismatch");
  Tape& t = *terms[0].tape();
  double v = 0;
  bool grad = false;
  std::vector<std::pair<int, double>> ids;
  for (size_t i = 0; i < terms.size(); ++i) {
    v += weights[i] * terms[i].scalar();
    grad = grad || t.needs_grad(terms[i].id());
    ids.emplace_back(terms[i].id(), weights[i]);
  }
  return t.push(Tensor::Constant(1, 1, v), grad, [ids](Tape& tp) {
    double g = tp.upstream()(0, 0);
    for (auto [id, w] : ids)
      tp.accumulate(id, Tensor::Constant(1, 1, g * w));
  });
}

// mean((a - target)^2) over all entries.
inline Var mse(const Var& a, const Tensor& target) {
  if (a.rows() != target.rows() || a.cols() != target.cols())
    throw InvalidInput("mse: shape mismatch");
  Tape& t = *a.tape();
  int ia = a.id();
  Tensor diff = a.value() - target;
  double n = static_cast<double>(diff.size());
  double v = diff.squaredNorm() / n;
  return t.push(Tensor::Constant(1, 1, v), detail::any_grad({a}), [ia, diff, n](Tape& tp) {
    tp.accumulate(ia, diff * (2.0 * tp.upstream()(0, 0) / n));
  });
}

inline Tensor softmax_rows(const Tensor& logits) {
  Tensor p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

// Mean over rows of -sum_k target[k] log softmax(logits)[k]; target rows are
// probability vectors (one-hot for hard labels).
inline Var cross_entropy(const Var& logits, const Tensor& target) {
  if (logits.rows() != target.rows() || logits.cols() != target.cols())
    throw InvalidInput("cross_entropy: shape mismatch");
  Tape& t = *logits.tape();
  int il = logits.id();
  Tensor p = softmax_rows(logits.value());
  double n = static_cast<double>(logits.rows());
  double v = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index k = 0; k < p.cols(); ++k)
      if (target(i, k) != 0)
        v -= target(i, k) * std::log(std::max(p(i, k), 1e-300));
  v /= n;
  return t.push(Tensor::Constant(1, 1, v), detail::any_grad({logits}),
                [il, p, target, n](Tape& tp) {
                  Tensor g = p;
                  for (Eigen::Index i = 0; i < g.rows(); ++i)
                    g.row(i) = g.row(i) * target.row(i).sum() - target.row(i);
                  tp.accumulate(il, g * (tp.upstream()(0, 0) / n));
                });
}

// KL(N(mu, exp(logvar)^2) || N(0, 1)) summed over dimensions and averaged
// over rows, for the parameterization z = mu + exp(logvar) * eps.
inline Var kl_normal(const Var& mu, const Var& logvar) {
  detail::require_same_shape(mu, logvar, "kl_normal");
  Tape& t = *mu.tape();
  int im = mu.id(), il = logvar.id();
  const Tensor& m = mu.value();
  const Tensor& lv = logvar.value();
  double n = static_cast<double>(m.rows());
  Tensor var = (2.0 * lv).array().exp();
  double v = 0.5 * (var.array() + m.array().square() - 1.0 - 2.0 * lv.array()).sum() / n;
  return t.push(Tensor::Constant(1, 1, v), detail::any_grad({mu, logvar}),
                [im, il, var, n](Tape& tp) {
                  double g = tp.upstream()(0, 0) / n;
                  if (tp.needs_grad(im))
                    tp.accumulate(im, tp.value(im) * g);
                  if (tp.needs_grad(il))
                    tp.accumulate(il, Tensor((var.array() - 1.0) * g));
                });
}

}  // namespace dpcdvae::ad
#endif
