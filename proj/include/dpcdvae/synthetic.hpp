// Randomly perturbed CsCl-type and rock-salt cells for desk-scale training.

#ifndef DPCDVAE_SYNTHETIC_HPP_
#define DPCDVAE_SYNTHETIC_HPP_

#include <algorithm>
#include <vector>

#include "lattice.hpp"
#include "rng.hpp"

namespace dpcdvae {

struct SyntheticConfig {
  int count = 500;
  int cation = 11;  // Na
  int anion = 17;   // Cl
  double cscl_a = 4.1;
  double rocksalt_a = 5.64;
  double scale_jitter = 0.1;    // lattice scale ~ U(1 - j, 1 + j) * a0
  double length_jitter = 0.01;  // per-axis relative sd
  double angle_jitter = 1.0;    // degrees sd around 90
  double coord_jitter = 0.005;  // fractional sd
  std::uint64_t seed = 7;
};

namespace detail {

inline CrystalStructure perturbed_cubic(const SyntheticConfig& c, bool rocksalt, Rng& rng) {
  Coords base;
  std::vector<int> z;
  double a0;
  if (rocksalt) {
    a0 = c.rocksalt_a;
    base.resize(8, 3);
    base << 0, 0, 0, 0, .5, .5, .5, 0, .5, .5, .5, 0,  // cations
        .5, 0, 0, 0, .5, 0, 0, 0, .5, .5, .5, .5;       // anions
    z = {c.cation, c.cation, c.cation, c.cation, c.anion, c.anion, c.anion, c.anion};
  } else {
    a0 = c.cscl_a;
    base.resize(2, 3);
    base << 0, 0, 0, .5, .5, .5;
    z = {c.cation, c.anion};
  }
  double s = a0 * (1.0 + c.scale_jitter * (2.0 * rng.uniform() - 1.0));
  LatticeParams p{s * (1 + c.length_jitter * rng.normal()), s * (1 + c.length_jitter * rng.normal()),
                  s * (1 + c.length_jitter * rng.normal()), 90 + c.angle_jitter * rng.normal(),
                  90 + c.angle_jitter * rng.normal(), 90 + c.angle_jitter * rng.normal()};
  Coords frac = base;
  for (Eigen::Index i = 0; i < frac.rows(); ++i)
    for (int k = 0; k < 3; ++k)
      frac(i, k) += c.coord_jitter * rng.normal();
  return CrystalStructure(lattice_from_params(p), wrap_pi(frac), std::move(z));
}

}  // namespace detail

// Alternates the two prototypes, so the set is balanced.
inline std::vector<CrystalStructure> make_synthetic_dataset(const SyntheticConfig& c) {
  if (c.count < 1)
    throw InvalidInput("synthetic dataset needs count >= 1");
  Rng rng(c.seed);
  std::vector<CrystalStructure> out;
  out.reserve(c.count);
  for (int i = 0; i < c.count; ++i)
    out.push_back(detail::perturbed_cubic(c, i % 2 == 1, rng));
  return out;
}

// Seeded shuffle then split: first `train_count` go to train.
inline std::pair<std::vector<CrystalStructure>, std::vector<CrystalStructure>> split_dataset(
    std::vector<CrystalStructure> data, size_t train_count, std::uint64_t seed) {
  if (train_count > data.size())
    throw InvalidInput("split larger than dataset");
  Rng rng(seed);
  std::shuffle(data.begin(), data.end(), rng.engine());
  std::vector<CrystalStructure> train(data.begin(), data.begin() + train_count);
  std::vector<CrystalStructure> test(data.begin() + train_count, data.end());
  return {std::move(train), std::move(test)};
}

}  // namespace dpcdvae
#endif
