// Noise schedules for coordinate diffusion (alpha, alpha_bar, sigma) and for
// atom-type perturbation (sigma_prime).

#ifndef DPCDVAE_SCHEDULE_HPP_
#define DPCDVAE_SCHEDULE_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace dpcdvae {

inline constexpr double kSigmaPrimeMin = 0.01;
inline constexpr double kSigmaPrimeMax = 5.0;

inline double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Arrays are indexed by step t directly; index 0 of alpha/sigma/sigma_prime is unused.
class NoiseSchedule {
 public:
  int steps() const { return steps_; }

  double alpha(int t) const { return alpha_.at(check(t)); }
  double alpha_bar(int t) const {
    if (t < 0 || t > steps_)
      throw InvalidInput("schedule step " + std::to_string(t) + " out of [0, T]");
    return alpha_bar_[t];
  }
  double sigma(int t) const { return sigma_.at(check(t)); }
  double sigma_prime_at(int t) const { return sigma_prime_.at(check(t)); }

  friend NoiseSchedule make_sigmoid_schedule(int, double, double);

 private:
  int check(int t) const {
    if (t < 1 || t > steps_)
      throw InvalidInput("schedule step " + std::to_string(t) + " out of [1, " +
                         std::to_string(steps_) + "]");
    return t;
  }

  int steps_ = 0;
  std::vector<double> alpha_, alpha_bar_, sigma_, sigma_prime_;
};

// alpha_bar[t] = logistic(-gamma(t)) with gamma linear from gamma_min (t=0)
// to gamma_max (t=T); alpha_bar[0] is pinned to 1. sigma_prime is geometric
// from 0.01 (t=1) to 5 (t=T).
inline NoiseSchedule make_sigmoid_schedule(int steps = 1000, double gamma_min = -10.0,
                                           double gamma_max = 10.0) {
  if (steps < 1)
    throw ScheduleError("schedule needs at least one step");
  if (!(gamma_min < gamma_max) || !std::isfinite(gamma_min) || !std::isfinite(gamma_max))
    throw ScheduleError("schedule requires finite gamma_min < gamma_max");
  NoiseSchedule s;
  s.steps_ = steps;
  s.alpha_.assign(steps + 1, 1.0);
  s.alpha_bar_.assign(steps + 1, 1.0);
  s.sigma_.assign(steps + 1, 0.0);
  s.sigma_prime_.assign(steps + 1, kSigmaPrimeMin);
  for (int t = 1; t <= steps; ++t) {
    double gamma = gamma_min + (gamma_max - gamma_min) * t / steps;
    double ab = logistic(-gamma);
    if (!(ab > 0.0 && ab <= 1.0) || !(ab < s.alpha_bar_[t - 1]))
      throw ScheduleError("alpha_bar leaves (0,1] or stops decreasing at t=" +
                          std::to_string(t));
    s.alpha_bar_[t] = ab;
    s.alpha_[t] = ab / s.alpha_bar_[t - 1];
    double var = (1.0 - s.alpha_bar_[t - 1]) * (1.0 - s.alpha_[t]) / (1.0 - ab);
    s.sigma_[t] = std::sqrt(std::max(var, 0.0));
    double frac = steps == 1 ? 0.0 : double(t - 1) / double(steps - 1);
    s.sigma_prime_[t] = kSigmaPrimeMin * std::pow(kSigmaPrimeMax / kSigmaPrimeMin, frac);
  }
  s.sigma_prime_[steps] = kSigmaPrimeMax;
  return s;
}

}  // namespace dpcdvae
#endif
