// Minibatch training loop with Adam.

#ifndef DPCDVAE_TRAIN_HPP_
#define DPCDVAE_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include "model.hpp"

namespace dpcdvae {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  LossWeights weights;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch;
  LossParts mean;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

inline void accumulate(LossParts& acc, const LossParts& p) {
  acc.total += p.total;
  acc.simple += p.simple;
  acc.ce += p.ce;
  acc.kld += p.kld;
  acc.lattice += p.lattice;
  acc.comp += p.comp;
  acc.num_atoms += p.num_atoms;
}

inline LossParts scaled(const LossParts& p, double k) {
  return {p.total * k, p.simple * k, p.ce * k, p.kld * k, p.lattice * k, p.comp * k,
          p.num_atoms * k};
}

}  // namespace detail

// Mean loss over `data` without updating parameters; the diffusion draws come
// from `seed`, so two calls with the same seed see the same noise.
inline LossParts mean_loss(const Model& model, const std::vector<CrystalStructure>& data,
                           const NoiseSchedule& schedule, const LossWeights& weights,
                           std::uint64_t seed) {
  if (data.empty())
    throw InvalidInput("mean_loss: empty dataset");
  Rng rng(seed);
  LossParts acc;
  for (const auto& s : data) {
    TrainingExample ex = model.make_example(s);
    LossDraw draw = model.draw_for(s, schedule, rng);
    ad::Tape tape(false);
    nn::Binding b(tape, model.params());
    detail::accumulate(acc, model.loss(b, ex, draw, schedule, weights).parts);
  }
  return detail::scaled(acc, 1.0 / static_cast<double>(data.size()));
}

// Initializes the lattice-head bias from the dataset means when `init_bias`.
inline std::vector<EpochRecord> train(Model& model, const std::vector<CrystalStructure>& data,
                                      const NoiseSchedule& schedule, const TrainConfig& cfg,
                                      const EpochCallback& on_epoch = {},
                                      bool init_bias = true) {
  if (data.empty())
    throw InvalidInput("training set is empty");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0))
    throw InvalidInput("invalid training configuration");

  std::vector<TrainingExample> examples;
  examples.reserve(data.size());
  double len = 0, ang = 0;
  for (const auto& s : data) {
    examples.push_back(model.make_example(s));
    auto p = s.lattice().parameters();
    len += (p.a + p.b + p.c) / 3.0;
    ang += (p.alpha + p.beta + p.gamma) / 3.0;
  }
  if (init_bias)
    model.init_lattice_bias(len / data.size(), ang / data.size());

  Rng rng(cfg.seed);
  nn::ParamStore& ps = model.params();
  nn::ParamStore::AdamState adam;
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<EpochRecord> history;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    LossParts acc;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      double inv = 1.0 / static_cast<double>(end - start);
      ps.zero_grad();
      for (size_t i = start; i < end; ++i) {
        const TrainingExample& ex = examples[order[i]];
        LossDraw draw = model.draw_for(*ex.structure, schedule, rng);
        ad::Tape tape;
        nn::Binding b(tape, ps);
        auto lv = model.loss(b, ex, draw, schedule, cfg.weights);
        tape.backward(lv.total);
        b.collect_grads(ps, inv);
        detail::accumulate(acc, lv.parts);
      }
      double gn = ps.grad_norm();
      if (!std::isfinite(gn)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << " (step " << adam.step + 1
            << ", lr " << cfg.learning_rate << ", grad norm " << gn << ")";
        throw DivergenceError(msg.str());
      }
      if (cfg.grad_clip > 0 && gn > cfg.grad_clip)
        for (size_t i = 0; i < ps.size(); ++i)
          ps.grad(static_cast<int>(i)) *= cfg.grad_clip / gn;
      ps.adam_step(cfg.learning_rate, adam);
    }
    EpochRecord rec{epoch, detail::scaled(acc, 1.0 / static_cast<double>(examples.size()))};
    if (!std::isfinite(rec.mean.total))
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " (lr " +
                            std::to_string(cfg.learning_rate) + ")");
    history.push_back(rec);
    if (on_epoch)
      on_epoch(rec);
  }
  return history;
}

}  // namespace dpcdvae
#endif
