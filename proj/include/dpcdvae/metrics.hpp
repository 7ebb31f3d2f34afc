// Evaluation: structure matching, validity, coverage, property distances and
// ground-state comparison.

#ifndef DPCDVAE_METRICS_HPP_
#define DPCDVAE_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "assignment.hpp"
#include "elements.hpp"
#include "graph.hpp"
#include "lattice.hpp"

namespace dpcdvae {

struct MatchCriteria {
  double stol = 0.5;
  double angle_tol = 10.0;  // degrees
  double ltol = 0.3;
};

inline void validate(const MatchCriteria& c) {
  if (!(c.stol > 0) || !(c.angle_tol > 0) || !(c.ltol > 0))
    throw InvalidInput("match tolerances must be positive");
}

namespace detail {

inline std::map<int, int> element_counts(const CrystalStructure& s) {
  std::map<int, int> c;
  for (int z : s.atomic_numbers())
    ++c[z];
  return c;
}

inline double vec_angle(const Eigen::RowVector3d& a, const Eigen::RowVector3d& b) {
  double c = a.dot(b) / (a.norm() * b.norm());
  return deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

// Integer bases M (rows in units of the candidate's reduced vectors) whose
// lattice M * cand has lengths and inter-axis angles within tolerance of
// `base`. Only det(M) = +1, so handedness is kept.
inline std::vector<Eigen::Matrix3d> lattice_mappings(const Eigen::Matrix3d& base,
                                                     const Eigen::Matrix3d& cand,
                                                     const MatchCriteria& c) {
  std::vector<Eigen::RowVector3i> coeffs;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      for (int k = -2; k <= 2; ++k)
        if (i || j || k)
          coeffs.emplace_back(i, j, k);
  std::array<std::vector<int>, 3> fits;
  for (int ax = 0; ax < 3; ++ax) {
    double target = base.row(ax).norm();
    for (size_t v = 0; v < coeffs.size(); ++v) {
      double len = (coeffs[v].cast<double>() * cand).norm();
      if (std::abs(len - target) <= c.ltol * target)
        fits[ax].push_back(static_cast<int>(v));
    }
  }
  const double alpha = vec_angle(base.row(1), base.row(2));
  const double beta = vec_angle(base.row(0), base.row(2));
  const double gamma = vec_angle(base.row(0), base.row(1));
  std::vector<Eigen::Matrix3d> out;
  for (int ia : fits[0]) {
    Eigen::RowVector3d va = coeffs[ia].cast<double>() * cand;
    for (int ib : fits[1]) {
      Eigen::RowVector3d vb = coeffs[ib].cast<double>() * cand;
      if (std::abs(vec_angle(va, vb) - gamma) > c.angle_tol)
        continue;
      for (int ic : fits[2]) {
        Eigen::Matrix3i m;
        m << coeffs[ia], coeffs[ib], coeffs[ic];
        if (m.determinant() != 1)
          continue;
        Eigen::RowVector3d vc = coeffs[ic].cast<double>() * cand;
        if (std::abs(vec_angle(vb, vc) - alpha) > c.angle_tol ||
            std::abs(vec_angle(va, vc) - beta) > c.angle_tol)
          continue;
        out.push_back(m.cast<double>());
      }
    }
  }
  return out;
}

// Lattice whose metric tensor is the mean of the two metrics. Unlike averaging
// the matrices this ignores the Cartesian orientation of either basis.
inline Lattice average_lattice(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  Eigen::Matrix3d g = 0.5 * (a * a.transpose() + b * b.transpose());
  Eigen::Matrix3d l = g.llt().matrixL();
  return Lattice::from_matrix(l);
}

struct SiteFit {
  double rms = std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

// Assign candidate sites to base sites species by species and return the
// normalized distances, after re-centering by the mean displacement.
inline SiteFit fit_sites(const Lattice& avg, const Coords& fb, const Coords& fc,
                         const std::vector<std::vector<int>>& groups_b,
                         const std::vector<std::vector<int>>& groups_c, double norm) {
  const auto n = fb.rows();
  Coords disp(n, 3);
  auto assign = [&](const Eigen::RowVector3d& shift) {
    for (size_t g = 0; g < groups_b.size(); ++g) {
      const auto& gb = groups_b[g];
      const auto& gc = groups_c[g];
      const int m = static_cast<int>(gb.size());
      Eigen::MatrixXd cost(m, m);
      std::vector<std::vector<Eigen::RowVector3d>> d(m, std::vector<Eigen::RowVector3d>(m));
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          d[i][j] = min_image_displacement(avg, fc.row(gc[j]) + shift, fb.row(gb[i]));
          cost(i, j) = (d[i][j] * avg.matrix()).squaredNorm();
        }
      Assignment a = solve_assignment(cost);
      for (int i = 0; i < m; ++i)
        disp.row(gb[i]) = d[i][a.col_of_row[i]];
    }
  };
  Eigen::RowVector3d shift = Eigen::RowVector3d::Zero();
  assign(shift);
  shift -= disp.colwise().mean();
  assign(shift);
  Eigen::VectorXd dist = (disp * avg.matrix()).rowwise().norm() / norm;
  return {std::sqrt(dist.squaredNorm() / static_cast<double>(n)), dist.maxCoeff()};
}

}  // namespace detail

// Normalized RMS site distance if the structures match, otherwise nullopt.
inline std::optional<double> structure_match(const CrystalStructure& base,
                                             const CrystalStructure& cand,
                                             const MatchCriteria& criteria = {}) {
  validate(criteria);
  auto counts = detail::element_counts(base);
  if (base.num_atoms() != cand.num_atoms() || counts != detail::element_counts(cand))
    return std::nullopt;
  NiggliResult rb = niggli_reduce(base.lattice());
  NiggliResult rc = niggli_reduce(cand.lattice());
  const Eigen::Matrix3d& lb = rb.lattice.matrix();
  // Fractional coordinates in the reduced bases: f' = f * P^{-1}.
  Coords fb = wrap_pi(Coords(base.frac_coords() * rb.transform.cast<double>().inverse()));
  Coords fc0 = cand.frac_coords() * rc.transform.cast<double>().inverse();

  std::vector<int> species;
  for (auto [z, n] : counts)
    species.push_back(z);
  // Rarest species first, ties broken by Z.
  std::stable_sort(species.begin(), species.end(),
                   [&](int a, int b) { return counts[a] < counts[b]; });
  std::vector<std::vector<int>> groups_b(species.size()), groups_c(species.size());
  for (size_t g = 0; g < species.size(); ++g)
    for (int i = 0; i < base.num_atoms(); ++i) {
      if (base.atomic_numbers()[i] == species[g])
        groups_b[g].push_back(i);
      if (cand.atomic_numbers()[i] == species[g])
        groups_c[g].push_back(i);
    }

  std::optional<double> best;
  const int anchor = groups_b[0][0];
  for (const Eigen::Matrix3d& m : detail::lattice_mappings(lb, rc.lattice.matrix(), criteria)) {
    Eigen::Matrix3d lc = m * rc.lattice.matrix();
    Coords fc = wrap_pi(Coords(fc0 * m.inverse()));
    Lattice avg = detail::average_lattice(lb, lc);
    double norm = std::cbrt(avg.volume() / base.num_atoms());
    for (int j : groups_c[0]) {
      Coords shifted = fc.rowwise() + (fb.row(anchor) - fc.row(j));
      detail::SiteFit fit = detail::fit_sites(avg, fb, shifted, groups_b, groups_c, norm);
      if (fit.max <= criteria.stol && (!best || fit.rms < *best))
        best = fit.rms;
    }
  }
  return best;
}

struct MatchSummary {
  double match_rate = 0;                // percent
  std::optional<double> mean_delta_rms;  // over matched pairs; absent when none match
  int matched = 0;
};

inline MatchSummary match_rate_and_rms(std::span<const CrystalStructure> bases,
                                       std::span<const CrystalStructure> candidates,
                                       const MatchCriteria& criteria = {}) {
  if (bases.empty())
    throw InvalidInput("match_rate_and_rms: empty list");
  if (bases.size() != candidates.size())
    throw InvalidInput("match_rate_and_rms: list lengths differ");
  MatchSummary s;
  double sum = 0;
  for (size_t i = 0; i < bases.size(); ++i)
    if (auto d = structure_match(bases[i], candidates[i], criteria)) {
      ++s.matched;
      sum += *d;
    }
  s.match_rate = 100.0 * s.matched / static_cast<double>(bases.size());
  if (s.matched > 0)
    s.mean_delta_rms = sum / s.matched;
  return s;
}

// ---- validity ---------------------------------------------------------------

inline constexpr double kMinBondLength = 0.5;  // Angstrom

// Shortest distance between distinct periodic sites (including an atom and
// its own images).
inline double min_pair_distance(const CrystalStructure& s) {
  NiggliResult r = niggli_reduce(s.lattice());
  Coords f = wrap_pi(Coords(s.frac_coords() * r.transform.cast<double>().inverse()));
  const Eigen::Matrix3d& m = r.lattice.matrix();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    best = std::min(best, m.row(i).norm());
  for (int i = 0; i < s.num_atoms(); ++i)
    for (int j = i + 1; j < s.num_atoms(); ++j)
      best = std::min(best, min_image_distance(r.lattice, f.row(i), f.row(j)));
  return best;
}

inline bool structure_valid(const CrystalStructure& s, double cutoff = kMinBondLength) {
  return min_pair_distance(s) > cutoff;
}

// True if one tabulated oxidation state per element makes the cell neutral.
// Single-element structures are valid; an element without tabulated states
// makes a compound invalid.
inline bool composition_valid(const CrystalStructure& s) {
  auto counts = detail::element_counts(s);
  if (counts.size() == 1)
    return true;
  std::vector<std::pair<int, std::span<const int>>> items;
  for (auto [z, n] : counts) {
    auto states = oxidation_states(z);
    if (states.empty())
      return false;
    items.emplace_back(n, states);
  }
  auto search = [&](auto&& self, size_t k, long charge) -> bool {
    if (k == items.size())
      return charge == 0;
    for (int ox : items[k].second)
      if (self(self, k + 1, charge + static_cast<long>(items[k].first) * ox))
        return true;
    return false;
  };
  return search(search, 0, 0);
}

struct Validity {
  bool structural;
  bool compositional;
};

inline Validity validity(const CrystalStructure& s) {
  return {structure_valid(s), composition_valid(s)};
}

// ---- properties -------------------------------------------------------------

inline constexpr double kGramsPerAmu = 1.66053906660e-24;
inline constexpr double kCubicCmPerCubicAngstrom = 1e-24;

inline double density(const CrystalStructure& s) {
  double mass = 0;
  for (int z : s.atomic_numbers())
    mass += atomic_mass(z);
  return mass * kGramsPerAmu / (s.lattice().volume() * kCubicCmPerCubicAngstrom);
}

inline int n_elements(const CrystalStructure& s) {
  return static_cast<int>(detail::element_counts(s).size());
}

// Exact W1 between empirical distributions: integral of |Q_a(u) - Q_b(u)|
// over the merged grid of quantile breakpoints.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw InvalidInput("wasserstein_1d: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  for (double v : x)
    if (!std::isfinite(v))
      throw InvalidInput("wasserstein_1d: non-finite sample");
  for (double v : y)
    if (!std::isfinite(v))
      throw InvalidInput("wasserstein_1d: non-finite sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  size_t i = 0, j = 0;
  double u = 0, total = 0;
  while (i < x.size() && j < y.size()) {
    double next = std::min((i + 1) / n, (j + 1) / m);
    total += (next - u) * std::abs(x[i] - y[j]);
    u = next;
    // Advance whichever quantile step ended (both on a shared breakpoint).
    if ((i + 1) / n <= next)
      ++i;
    if ((j + 1) / m <= next)
      ++j;
  }
  return total;
}

// ---- coverage -----------------------------------------------------------------

struct CoverageThresholds {
  double composition = 0.1;  // Euclidean distance between element-fraction vectors
  double structure = 0.5;    // RMS difference of radial distribution functions
  double rdf_cutoff = 10.0;  // Angstrom
  double rdf_bin = 0.1;
  double rdf_smearing = 0.1;
};

struct Fingerprint {
  std::map<int, double> fractions;
  Eigen::VectorXd rdf;
};

// Gaussian-smeared g(r): pair counts per bin divided by N * rho * 4 pi r^2 dr.
inline Eigen::VectorXd radial_distribution(const CrystalStructure& s,
                                           const CoverageThresholds& t = {}) {
  const int bins = static_cast<int>(std::lround(t.rdf_cutoff / t.rdf_bin));
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(bins);
  const double reach = t.rdf_cutoff + 4 * t.rdf_smearing;
  PeriodicGraph g = build_periodic_graph(s, reach, std::numeric_limits<int>::max() / 2);
  for (const Edge& e : g.edges)
    for (int b = 0; b < bins; ++b) {
      double center = (b + 0.5) * t.rdf_bin;
      double x = (e.length - center) / t.rdf_smearing;
      if (std::abs(x) < 5)
        hist[b] += std::exp(-0.5 * x * x) * t.rdf_bin / (t.rdf_smearing * std::sqrt(2 * std::numbers::pi));
    }
  const double n = s.num_atoms();
  const double rho = n / s.lattice().volume();
  for (int b = 0; b < bins; ++b) {
    double r = (b + 0.5) * t.rdf_bin;
    hist[b] /= n * rho * 4 * std::numbers::pi * r * r * t.rdf_bin;
  }
  return hist;
}

inline Fingerprint fingerprint(const CrystalStructure& s, const CoverageThresholds& t = {}) {
  Fingerprint f;
  for (auto [z, c] : detail::element_counts(s))
    f.fractions[z] = static_cast<double>(c) / s.num_atoms();
  f.rdf = radial_distribution(s, t);
  return f;
}

inline double composition_distance(const Fingerprint& a, const Fingerprint& b) {
  std::map<int, double> d = a.fractions;
  for (auto [z, x] : b.fractions)
    d[z] -= x;
  double s = 0;
  for (auto [z, x] : d)
    s += x * x;
  return std::sqrt(s);
}

inline double structure_distance(const Fingerprint& a, const Fingerprint& b) {
  return std::sqrt((a.rdf - b.rdf).squaredNorm() / static_cast<double>(a.rdf.size()));
}

struct CoverageResult {
  double cov_r;
  double cov_p;
};

inline CoverageResult coverage(std::span<const CrystalStructure> generated,
                               std::span<const CrystalStructure> reference,
                               const CoverageThresholds& t = {}) {
  if (generated.empty() || reference.empty())
    throw InvalidInput("coverage: empty list");
  std::vector<Fingerprint> fg, fr;
  for (const auto& s : generated)
    fg.push_back(fingerprint(s, t));
  for (const auto& s : reference)
    fr.push_back(fingerprint(s, t));
  std::vector<char> ref_hit(fr.size(), 0), gen_hit(fg.size(), 0);
  for (size_t i = 0; i < fg.size(); ++i)
    for (size_t j = 0; j < fr.size(); ++j)
      if (composition_distance(fg[i], fr[j]) <= t.composition &&
          structure_distance(fg[i], fr[j]) <= t.structure) {
        gen_hit[i] = 1;
        ref_hit[j] = 1;
      }
  auto pct = [](const std::vector<char>& v) {
    return 100.0 * static_cast<double>(std::count(v.begin(), v.end(), 1)) /
           static_cast<double>(v.size());
  };
  return {pct(ref_hit), pct(gen_hit)};
}

// ---- ground state -------------------------------------------------------------

struct GroundStateSummary {
  MatchSummary match;
  double delta_v_rms;  // Angstrom^3 / atom
  double delta_e_rms;  // meV / atom
};

inline GroundStateSummary ground_state_compare(std::span<const CrystalStructure> generated,
                                               std::span<const CrystalStructure> relaxed,
                                               std::span<const double> energies_gen,
                                               std::span<const double> energies_rel,
                                               const MatchCriteria& criteria = {}) {
  if (generated.size() != relaxed.size() || energies_gen.size() != generated.size() ||
      energies_rel.size() != relaxed.size())
    throw InvalidInput("ground_state_compare: list lengths differ");
  GroundStateSummary g{match_rate_and_rms(relaxed, generated, criteria), 0, 0};
  double sv = 0, se = 0;
  for (size_t i = 0; i < generated.size(); ++i) {
    double dv = generated[i].lattice().volume() / generated[i].num_atoms() -
                relaxed[i].lattice().volume() / relaxed[i].num_atoms();
    double de = 1000.0 * (energies_gen[i] - energies_rel[i]);
    sv += dv * dv;
    se += de * de;
  }
  const double n = static_cast<double>(generated.size());
  g.delta_v_rms = std::sqrt(sv / n);
  g.delta_e_rms = std::sqrt(se / n);
  return g;
}

// Flat report; absent fields are metrics that were not computed or are undefined.
struct MetricsReport {
  std::optional<double> match_rate, mean_delta_rms, validity_struct, validity_comp, cov_r, cov_p,
      wasserstein_rho, wasserstein_nelem, delta_v_rms, delta_e_rms;
};

}  // namespace dpcdvae
#endif
