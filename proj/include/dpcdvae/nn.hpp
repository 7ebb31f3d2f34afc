// Named parameter storage, dense layers and the Adam optimizer.

#ifndef DPCDVAE_NN_HPP_
#define DPCDVAE_NN_HPP_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "rng.hpp"

namespace dpcdvae::nn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Learnable tensors in registration order, plus gradient and Adam moment slots.
class ParamStore {
 public:
  int add(const std::string& name, Tensor init) {
    if (index_.count(name))
      throw InvalidInput("duplicate parameter name " + name);
    index_[name] = static_cast<int>(tensors_.size());
    grads_.push_back(Tensor::Zero(init.rows(), init.cols()));
    m_.push_back(grads_.back());
    v_.push_back(grads_.back());
    tensors_.push_back({name, std::move(init)});
    return static_cast<int>(tensors_.size()) - 1;
  }

  size_t size() const { return tensors_.size(); }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  NamedTensor& at(int i) { return tensors_[i]; }
  const NamedTensor& at(int i) const { return tensors_[i]; }
  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw InvalidInput("unknown parameter " + name);
    return it->second;
  }

  Tensor& grad(int i) { return grads_[i]; }
  const Tensor& grad(int i) const { return grads_[i]; }

  size_t num_scalars() const {
    size_t n = 0;
    for (const auto& t : tensors_)
      n += static_cast<size_t>(t.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& g : grads_)
      g.setZero();
  }

  double grad_norm() const {
    double s = 0;
    for (const auto& g : grads_)
      s += g.squaredNorm();
    return std::sqrt(s);
  }

  // Replace all values (e.g. after loading a checkpoint); names and shapes must agree.
  void assign(const std::vector<NamedTensor>& values) {
    if (values.size() != tensors_.size())
      throw ParseError("parameter count mismatch: expected " + std::to_string(tensors_.size()) +
                       ", got " + std::to_string(values.size()));
    for (size_t i = 0; i < values.size(); ++i) {
      const auto& src = values[i];
      auto& dst = tensors_[i];
      if (src.name != dst.name || src.value.rows() != dst.value.rows() ||
          src.value.cols() != dst.value.cols())
        throw ParseError("parameter mismatch at '" + dst.name + "'");
      dst.value = src.value;
    }
  }

  struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
  };

  void adam_step(double lr, AdamState& st) {
    ++st.step;
    double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < tensors_.size(); ++i) {
      m_[i] = st.beta1 * m_[i] + (1.0 - st.beta1) * grads_[i];
      v_[i] = st.beta2 * v_[i] + (1.0 - st.beta2) * grads_[i].cwiseProduct(grads_[i]);
      tensors_[i].value.array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + st.eps);
    }
  }

 private:
  std::vector<NamedTensor> tensors_;
  std::vector<Tensor> grads_, m_, v_;
  std::map<std::string, int> index_;
};

// Lazily places parameters on a tape and routes their gradients back.
class Binding {
 public:
  Binding(Tape& tape, const ParamStore& store)
      : tape_(tape), store_(store), vars_(store.size()) {}

  Var operator()(int index) {
    Var& v = vars_[index];
    if (v.tape() == nullptr)
      v = tape_.leaf(store_.at(index).value);
    return v;
  }

  Tape& tape() { return tape_; }

  // Adds each bound leaf's gradient, scaled, into `target` (the same store).
  void collect_grads(ParamStore& target, double scale = 1.0) const {
    for (size_t i = 0; i < vars_.size(); ++i) {
      const Var& v = vars_[i];
      if (v.tape() != nullptr && v.grad().size() > 0)
        target.grad(static_cast<int>(i)) += scale * v.grad();
    }
  }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::vector<Var> vars_;
};

struct Linear {
  int weight = -1;  // in x out
  int bias = -1;    // 1 x out, -1 when absent

  static Linear make(ParamStore& ps, const std::string& name, int in, int out, Rng& rng,
                     double gain = 1.0, bool with_bias = true) {
    double bound = gain * std::sqrt(6.0 / (in + out));
    Tensor w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    Linear l;
    l.weight = ps.add(name + ".weight", std::move(w));
    if (with_bias)
      l.bias = ps.add(name + ".bias", Tensor::Zero(1, out));
    return l;
  }

  Var operator()(Binding& b, const Var& x) const {
    Var y = ad::matmul(x, b(weight));
    return bias >= 0 ? ad::add_row(y, b(bias)) : y;
  }
};

// Linear layers with SiLU between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  static Mlp make(ParamStore& ps, const std::string& name, const std::vector<int>& widths,
                  Rng& rng, double last_gain = 1.0) {
    Mlp m;
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
      bool last = i + 2 == widths.size();
      m.layers.push_back(Linear::make(ps, name + "." + std::to_string(i), widths[i],
                                      widths[i + 1], rng, last ? last_gain : 1.0));
    }
    return m;
  }

  Var operator()(Binding& b, Var x) const {
    for (size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](b, x);
      if (i + 1 < layers.size())
        x = ad::silu(x);
    }
    return x;
  }

  const Linear& last() const { return layers.back(); }
};

}  // namespace dpcdvae::nn
#endif
