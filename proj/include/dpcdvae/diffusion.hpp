// Forward perturbation and reverse sampling of fractional coordinates, plus
// the categorical perturbation of atom types.

#ifndef DPCDVAE_DIFFUSION_HPP_
#define DPCDVAE_DIFFUSION_HPP_

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "lattice.hpp"
#include "rng.hpp"
#include "schedule.hpp"

namespace dpcdvae {

enum class ReverseVariant { kStandard, kPeriodic };
enum class InitialTypes { kCategorical, kArgmax };

struct DiffusionState {
  int t;
  Coords r;       // unwrapped
  Coords r_frac;  // wrap_pi(r)
};

inline void check_same_shape(const Coords& a, const Coords& b, const char* what) {
  if (a.rows() != b.rows())
    throw InvalidInput(std::string(what) + ": row count mismatch");
}

// r_t = sqrt(abar_t) r_0 + sqrt(1 - abar_t) eps, then wrapped.
inline DiffusionState forward_perturb(const Coords& r0, int t, const NoiseSchedule& schedule,
                                      const Coords& noise) {
  check_same_shape(r0, noise, "forward_perturb");
  if (t < 1)
    throw InvalidInput("forward_perturb: t must be >= 1");
  double ab = schedule.alpha_bar(t);
  Coords r = std::sqrt(ab) * r0 + std::sqrt(1.0 - ab) * noise;
  return {t, r, wrap_pi(r)};
}

// DDPM ancestral step on unwrapped coordinates.
inline Coords reverse_step_standard(const Coords& r_t, const Coords& eps_theta, int t,
                                    const NoiseSchedule& schedule, const Coords& noise) {
  check_same_shape(r_t, eps_theta, "reverse_step_standard");
  check_same_shape(r_t, noise, "reverse_step_standard");
  double a = schedule.alpha(t), ab = schedule.alpha_bar(t), s = schedule.sigma(t);
  return (r_t - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_theta) / std::sqrt(a) + s * noise;
}

// Step that starts from wrapped coordinates and uses abar_t in the leading
// factor; the result is wrapped again.
inline DiffusionState reverse_step_periodic(const Coords& r_frac_t, const Coords& eps_theta,
                                            int t, const NoiseSchedule& schedule,
                                            const Coords& noise) {
  check_same_shape(r_frac_t, eps_theta, "reverse_step_periodic");
  check_same_shape(r_frac_t, noise, "reverse_step_periodic");
  double ab = schedule.alpha_bar(t), s = schedule.sigma(t);
  Coords r = (r_frac_t - std::sqrt(1.0 - ab) * eps_theta) / std::sqrt(ab) + s * noise;
  if (!r.allFinite())
    throw DivergenceError("non-finite coordinates at step " + std::to_string(t));
  return {t - 1, r, wrap_pi(r)};
}

// Row-wise softmax(one_hot + sigma' * composition) probabilities.
inline Eigen::MatrixXd type_probabilities(const Eigen::MatrixXd& one_hot,
                                          const Eigen::VectorXd& composition,
                                          double sigma_prime) {
  if (one_hot.cols() != composition.size())
    throw InvalidInput("perturb_types: one-hot width " + std::to_string(one_hot.cols()) +
                       " != composition size " + std::to_string(composition.size()));
  Eigen::MatrixXd logits = one_hot;
  logits.rowwise() += sigma_prime * composition.transpose();
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

// Z_t ~ Multinomial(softmax(A + sigma'_t A_z)), one draw per atom.
// Returns indices into the element vocabulary.
inline std::vector<int> perturb_types(const Eigen::MatrixXd& one_hot,
                                      const Eigen::VectorXd& composition, int t,
                                      const NoiseSchedule& schedule, Rng& rng) {
  Eigen::MatrixXd p = type_probabilities(one_hot, composition, schedule.sigma_prime_at(t));
  std::vector<int> out(p.rows());
  std::vector<double> row(p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.cols(); ++k)
      row[k] = p(i, k);
    out[i] = rng.categorical(row);
  }
  return out;
}

inline Eigen::MatrixXd one_hot(std::span<const int> indices, int k) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(indices.size()), k);
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= k)
      throw InvalidInput("type index out of vocabulary");
    a(static_cast<Eigen::Index>(i), indices[i]) = 1.0;
  }
  return a;
}

inline std::vector<int> initial_types(const Eigen::VectorXd& composition, int num_atoms,
                                      InitialTypes mode, Rng& rng) {
  std::vector<int> types(num_atoms);
  Eigen::Index best = 0;
  composition.maxCoeff(&best);
  std::vector<double> w(composition.data(), composition.data() + composition.size());
  for (int i = 0; i < num_atoms; ++i)
    types[i] = mode == InitialTypes::kArgmax ? static_cast<int>(best) : rng.categorical(w);
  return types;
}

struct DenoiserOutput {
  Coords eps;                   // N x 3, fractional frame
  Eigen::MatrixXd type_logits;  // N x K
};

// A denoiser sees the lattice, unwrapped and wrapped coordinates, current
// type indices and the step.
template <class D>
concept Denoiser = requires(const D& d, const Lattice& l, const Coords& r,
                            const std::vector<int>& types, int t) {
  { d(l, r, r, types, t) } -> std::convertible_to<DenoiserOutput>;
};

struct SamplerOptions {
  ReverseVariant variant = ReverseVariant::kPeriodic;
  bool add_noise = true;  // false suppresses sigma_t * eps' (oracle tests)
};

struct Trajectory {
  Coords r;                // final unwrapped coordinates
  std::vector<int> types;  // final vocabulary indices
};

// Runs t = T..1 from the given r_T, updating types to argmax of the
// predicted logits after every step.
template <Denoiser D>
Trajectory run_reverse_process(const D& denoiser, const Lattice& lattice, Coords r,
                               std::vector<int> types, const NoiseSchedule& schedule,
                               Rng& rng, const SamplerOptions& opt) {
  const int n = static_cast<int>(r.rows());
  if (static_cast<int>(types.size()) != n)
    throw InvalidInput("sample_trajectory: types and coordinates differ in length");
  for (int t = schedule.steps(); t >= 1; --t) {
    Coords rf = wrap_pi(r);
    DenoiserOutput out = denoiser(lattice, r, rf, types, t);
    if (!out.eps.allFinite() || !out.type_logits.allFinite())
      throw DivergenceError("denoiser produced non-finite output at step " +
                            std::to_string(t));
    Coords noise = opt.add_noise ? rng.normal_coords(n) : Coords::Zero(n, 3);
    if (opt.variant == ReverseVariant::kPeriodic) {
      r = reverse_step_periodic(rf, out.eps, t, schedule, noise).r;
    } else {
      r = reverse_step_standard(r, out.eps, t, schedule, noise);
      if (!r.allFinite())
        throw DivergenceError("non-finite coordinates at step " + std::to_string(t));
    }
    for (int i = 0; i < n; ++i) {
      Eigen::Index k;
      out.type_logits.row(i).maxCoeff(&k);
      types[i] = static_cast<int>(k);
    }
  }
  return {r, types};
}

// Full generation from r_T ~ N(0, I); returns the wrapped structure with
// vocabulary indices mapped to atomic numbers.
template <Denoiser D>
CrystalStructure sample_trajectory(const D& denoiser, const Lattice& lattice,
                                   std::vector<int> initial, std::span<const int> vocabulary,
                                   const NoiseSchedule& schedule, Rng& rng,
                                   const SamplerOptions& opt = {}) {
  Coords r_T = rng.normal_coords(static_cast<int>(initial.size()));
  Trajectory tr = run_reverse_process(denoiser, lattice, r_T, std::move(initial), schedule,
                                      rng, opt);
  std::vector<int> z(tr.types.size());
  for (size_t i = 0; i < z.size(); ++i)
    z[i] = vocabulary[tr.types[i]];
  return CrystalStructure(lattice, wrap_pi(tr.r), std::move(z));
}

}  // namespace dpcdvae
#endif
