// Seeded random source. Every stochastic kernel takes one of these explicitly.

#ifndef DPCDVAE_RNG_HPP_
#define DPCDVAE_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>

#include "lattice.hpp"

namespace dpcdvae {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  Coords normal_coords(int rows) {
    Coords c(rows, 3);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < 3; ++j)
        c(i, j) = normal();
    return c;
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
      v[i] = normal();
    return v;
  }

  // Index drawn from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights) {
    double total = 0;
    for (double w : weights)
      total += w;
    double u = uniform() * total;
    for (size_t k = 0; k < weights.size(); ++k) {
      u -= weights[k];
      if (u < 0)
        return static_cast<int>(k);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // Independent child stream (for per-structure sampling).
  Rng split() { return Rng(engine_()); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dpcdvae
#endif
