// Crystal geometry kernel: lattice parameterization, the periodic wrap map,
// minimum-image distances and Niggli (Krivy-Gruber) reduction.
//
// Conventions: lattice vectors are the ROWS of L, fractional coordinates are
// row vectors, so a Cartesian position is r_c = r_f * L and det L is the cell
// volume (always > 0, right-handed).

#ifndef DPCDVAE_LATTICE_HPP_
#define DPCDVAE_LATTICE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elements.hpp"
#include "error.hpp"

namespace dpcdvae {

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct LatticeParams {
  double a, b, c;              // Angstrom
  double alpha, beta, gamma;   // degrees
};

// Angles closer than this (degrees) to 0 or 180 are rejected.
inline constexpr double kDegenerateAngleTol = 1e-6;

class Lattice {
 public:
  // Accepts any right-handed, non-degenerate basis.
  static Lattice from_matrix(const Eigen::Matrix3d& m) {
    if (!m.allFinite())
      throw InvalidInput("lattice matrix has non-finite entries");
    double det = m.determinant();
    if (!(det > 0))
      throw GeometryError("lattice matrix must have positive determinant (got " +
                          std::to_string(det) + ")");
    Lattice lat(m);
    auto p = lat.parameters();
    for (double ang : {p.alpha, p.beta, p.gamma})
      if (ang < kDegenerateAngleTol || ang > 180.0 - kDegenerateAngleTol)
        throw GeometryError("degenerate lattice angle " + std::to_string(ang));
    return lat;
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  const Eigen::Matrix3d& inverse() const { return inv_; }
  double volume() const { return volume_; }

  Eigen::RowVector3d row(int i) const { return m_.row(i); }

  LatticeParams parameters() const {
    Eigen::Vector3d a = m_.row(0), b = m_.row(1), c = m_.row(2);
    double la = a.norm(), lb = b.norm(), lc = c.norm();
    auto angle = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
      double cosv = u.dot(v) / (u.norm() * v.norm());
      return deg(std::acos(std::clamp(cosv, -1.0, 1.0)));
    };
    return {la, lb, lc, angle(b, c), angle(a, c), angle(a, b)};
  }

  Coords to_cartesian(const Coords& frac) const { return frac * m_; }
  Coords to_fractional(const Coords& cart) const { return cart * inv_; }

  // Perpendicular distance between opposite faces, per axis.
  Eigen::Vector3d heights() const {
    Eigen::Vector3d h;
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d u = m_.row((i + 1) % 3), v = m_.row((i + 2) % 3);
      h[i] = volume_ / u.cross(v).norm();
    }
    return h;
  }

 private:
  explicit Lattice(const Eigen::Matrix3d& m)
      : m_(m), inv_(m.inverse()), volume_(m.determinant()) {}

  Eigen::Matrix3d m_;
  Eigen::Matrix3d inv_;
  double volume_;
};

// Canonical orientation: a along x, b in the xy-plane, c with positive z.
inline Lattice lattice_from_params(const LatticeParams& p) {
  for (double v : {p.a, p.b, p.c, p.alpha, p.beta, p.gamma})
    if (!std::isfinite(v))
      throw InvalidInput("non-finite lattice parameter");
  if (!(p.a > 0 && p.b > 0 && p.c > 0))
    throw GeometryError("lattice lengths must be positive");
  for (double ang : {p.alpha, p.beta, p.gamma})
    if (!(ang > kDegenerateAngleTol && ang < 180.0 - kDegenerateAngleTol))
      throw GeometryError("lattice angle out of (0, 180): " + std::to_string(ang));
  double ca = std::cos(rad(p.alpha)), cb = std::cos(rad(p.beta));
  double cg = std::cos(rad(p.gamma)), sg = std::sin(rad(p.gamma));
  double cy = (ca - cb * cg) / sg;
  double z2 = 1.0 - cb * cb - cy * cy;
  if (!(z2 > 1e-12))
    throw GeometryError("angle triple is not geometrically realizable");
  Eigen::Matrix3d m;
  m << p.a, 0, 0,
       p.b * cg, p.b * sg, 0,
       p.c * cb, p.c * cy, p.c * std::sqrt(z2);
  return Lattice::from_matrix(m);
}

inline Lattice lattice_from_params(double a, double b, double c, double alpha, double beta,
                                   double gamma) {
  return lattice_from_params(LatticeParams{a, b, c, alpha, beta, gamma});
}

inline LatticeParams params_from_matrix(const Eigen::Matrix3d& m) {
  return Lattice::from_matrix(m).parameters();
}

// The wrap map r -> r - floor(r). Values that round up to exactly 1.0
// (inputs like -1e-20) are folded to 0 so the result stays in [0,1).
inline double wrap_pi(double x) {
  if (!std::isfinite(x))
    throw InvalidInput("wrap_pi: non-finite coordinate");
  double w = x - std::floor(x);
  return w >= 1.0 ? 0.0 : w;
}

inline Coords wrap_pi(const Coords& r) {
  if (!r.allFinite())
    throw InvalidInput("wrap_pi: non-finite coordinate");
  return r.unaryExpr([](double x) { return wrap_pi(x); });
}

inline Eigen::RowVector3d wrap_pi(const Eigen::RowVector3d& r) {
  if (!r.allFinite())
    throw InvalidInput("wrap_pi: non-finite coordinate");
  return r.unaryExpr([](double x) { return wrap_pi(x); });
}

// Fractional displacement (b -> a) of the nearest periodic image, searching
// T in [-1,1]^3 around the rounded difference. Exact for Niggli-reduced cells;
// reduce first otherwise.
inline Eigen::RowVector3d min_image_displacement(const Lattice& lattice,
                                                 const Eigen::RowVector3d& frac_a,
                                                 const Eigen::RowVector3d& frac_b) {
  if (!frac_a.allFinite() || !frac_b.allFinite())
    throw InvalidInput("min_image_distance: non-finite coordinate");
  Eigen::RowVector3d d = frac_a - frac_b;
  d = d - d.array().round().matrix();
  const Eigen::Matrix3d& m = lattice.matrix();
  double best = std::numeric_limits<double>::infinity();
  Eigen::RowVector3d best_d = d;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        Eigen::RowVector3d cand = d + Eigen::RowVector3d(i, j, k);
        double n2 = (cand * m).squaredNorm();
        if (n2 < best) {
          best = n2;
          best_d = cand;
        }
      }
  return best_d;
}

inline double min_image_distance(const Lattice& lattice, const Eigen::RowVector3d& frac_a,
                                 const Eigen::RowVector3d& frac_b) {
  return (min_image_displacement(lattice, frac_a, frac_b) * lattice.matrix()).norm();
}

struct NiggliResult {
  Lattice lattice;
  // Integer change of basis: lattice.matrix() == transform * input.matrix().
  Eigen::Matrix3i transform;
  int iterations;
};

// Krivy-Gruber reduction on the metric tensor, tracking the integer
// transformation. Comparisons use eps = tol * V^(2/3) (units of G entries).
inline NiggliResult niggli_reduce(const Lattice& lattice, double tol = 1e-5,
                                  int max_iterations = 100) {
  const Eigen::Matrix3d& m0 = lattice.matrix();
  const double e = tol * std::pow(lattice.volume(), 2.0 / 3.0);
  Eigen::Matrix3i p = Eigen::Matrix3i::Identity();
  auto metric = [&] {
    Eigen::Matrix3d b = p.cast<double>() * m0;
    return Eigen::Matrix3d(b * b.transpose());
  };
  // G' = M^T G M corresponds to new basis rows P' = M^T P.
  auto apply = [&](const Eigen::Matrix3i& mm) { p = mm.transpose() * p; };
  auto sign = [&](double x) { return std::abs(x) < e ? 0 : (x > 0 ? 1 : -1); };

  int it = 0;
  for (;; ++it) {
    if (it == max_iterations)
      throw ReductionError("Niggli reduction did not converge in " +
                           std::to_string(max_iterations) + " iterations");
    Eigen::Matrix3d g = metric();
    double A = g(0, 0), B = g(1, 1), C = g(2, 2);
    double E = 2 * g(1, 2), N = 2 * g(0, 2), Y = 2 * g(0, 1);
    // A1
    if (A > B + e || (std::abs(A - B) < e && std::abs(E) > std::abs(N) + e)) {
      Eigen::Matrix3i mm;
      mm << 0, -1, 0, -1, 0, 0, 0, 0, -1;
      apply(mm);
      g = metric();
      A = g(0, 0), B = g(1, 1), C = g(2, 2);
      E = 2 * g(1, 2), N = 2 * g(0, 2), Y = 2 * g(0, 1);
    }
    // A2
    if (B > C + e || (std::abs(B - C) < e && std::abs(N) > std::abs(Y) + e)) {
      Eigen::Matrix3i mm;
      mm << -1, 0, 0, 0, 0, -1, 0, -1, 0;
      apply(mm);
      continue;
    }
    int l = sign(E), mth = sign(N), n = sign(Y);
    if (l * mth * n == 1) {  // A3
      Eigen::Matrix3i mm = Eigen::Matrix3i::Zero();
      mm(0, 0) = l == -1 ? -1 : 1;
      mm(1, 1) = mth == -1 ? -1 : 1;
      mm(2, 2) = n == -1 ? -1 : 1;
      apply(mm);
    } else {  // A4
      int i = l == 1 ? -1 : 1, j = mth == 1 ? -1 : 1, k = n == 1 ? -1 : 1;
      if (i * j * k == -1) {
        if (n == 0)
          k = -1;
        else if (mth == 0)
          j = -1;
        else if (l == 0)
          i = -1;
      }
      Eigen::Matrix3i mm = Eigen::Matrix3i::Zero();
      mm(0, 0) = i, mm(1, 1) = j, mm(2, 2) = k;
      apply(mm);
    }
    g = metric();
    A = g(0, 0), B = g(1, 1), C = g(2, 2);
    E = 2 * g(1, 2), N = 2 * g(0, 2), Y = 2 * g(0, 1);
    // A5
    if (std::abs(E) > B + e || (std::abs(E - B) < e && 2 * N < Y - e) ||
        (std::abs(E + B) < e && Y < -e)) {
      Eigen::Matrix3i mm = Eigen::Matrix3i::Identity();
      mm(1, 2) = E > 0 ? -1 : 1;
      apply(mm);
      continue;
    }
    // A6
    if (std::abs(N) > A + e || (std::abs(A - N) < e && 2 * E < Y - e) ||
        (std::abs(A + N) < e && Y < -e)) {
      Eigen::Matrix3i mm = Eigen::Matrix3i::Identity();
      mm(0, 2) = N > 0 ? -1 : 1;
      apply(mm);
      continue;
    }
    // A7
    if (std::abs(Y) > A + e || (std::abs(A - Y) < e && 2 * E < N - e) ||
        (std::abs(A + Y) < e && N < -e)) {
      Eigen::Matrix3i mm = Eigen::Matrix3i::Identity();
      mm(0, 1) = Y > 0 ? -1 : 1;
      apply(mm);
      continue;
    }
    // A8
    double s = E + N + Y + A + B;
    if (s < -e || (std::abs(s) < e && Y + (A + N) * 2 > e)) {
      Eigen::Matrix3i mm = Eigen::Matrix3i::Identity();
      mm(0, 2) = 1, mm(1, 2) = 1;
      apply(mm);
      continue;
    }
    break;
  }
  if (p.determinant() != 1)
    throw ReductionError("Niggli transform is not unimodular");
  return {Lattice::from_matrix(p.cast<double>() * m0), p, it + 1};
}

class CrystalStructure {
 public:
  CrystalStructure(Lattice lattice, Coords frac, std::vector<int> numbers)
      : lattice_(std::move(lattice)), frac_(std::move(frac)), numbers_(std::move(numbers)) {
    if (numbers_.empty())
      throw InvalidInput("structure must contain at least one atom");
    if (static_cast<size_t>(frac_.rows()) != numbers_.size())
      throw InvalidInput("coordinate rows and atomic numbers differ in length");
    if (!frac_.allFinite())
      throw InvalidInput("non-finite fractional coordinate");
    if ((frac_.array() < 0.0).any() || (frac_.array() >= 1.0).any())
      throw InvalidInput("fractional coordinates must lie in [0,1)");
    for (int z : numbers_)
      if (!is_valid_atomic_number(z))
        throw InvalidInput("atomic number out of range: " + std::to_string(z));
  }

  const Lattice& lattice() const { return lattice_; }
  const Coords& frac_coords() const { return frac_; }
  const std::vector<int>& atomic_numbers() const { return numbers_; }
  int num_atoms() const { return static_cast<int>(numbers_.size()); }
  Coords cart_coords() const { return lattice_.to_cartesian(frac_); }

 private:
  Lattice lattice_;
  Coords frac_;
  std::vector<int> numbers_;
};

}  // namespace dpcdvae
#endif
