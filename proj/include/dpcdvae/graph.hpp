// Periodic neighbor graph over translated images of the unit cell.

#ifndef DPCDVAE_GRAPH_HPP_
#define DPCDVAE_GRAPH_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include "lattice.hpp"

namespace dpcdvae {

using Translation = std::array<int, 3>;

// Edge from neighbor `src` (image shifted by `shift`) into atom `dst`:
// vec = r_c[src] - r_c[dst] + shift * L, so vec points from dst to the image.
struct Edge {
  int src;
  int dst;
  Translation shift;
  Eigen::RowVector3d vec;
  double length;
};

struct PeriodicGraph {
  int num_nodes = 0;
  std::vector<Edge> edges;  // sorted by (dst, length, shift, src)
};

namespace detail {

inline Translation negate(const Translation& t) { return {-t[0], -t[1], -t[2]}; }

}  // namespace detail

// Keeps every image pair with length <= cutoff, truncated to the
// max_neighbors nearest per atom (ties broken by shift, then src), then
// closed under reversal so the edge set is symmetric.
inline PeriodicGraph build_periodic_graph(const Lattice& lattice, const Coords& frac,
                                          double cutoff, int max_neighbors) {
  if (!(cutoff > 0))
    throw InvalidInput("graph cutoff must be positive");
  if (max_neighbors < 1)
    throw InvalidInput("max_neighbors must be >= 1");
  const int n = static_cast<int>(frac.rows());
  const Eigen::Matrix3d& m = lattice.matrix();
  const Coords cart = frac * m;
  Eigen::Vector3d h = lattice.heights();
  std::array<int, 3> range;
  double images = 1;
  for (int i = 0; i < 3; ++i) {
    double r = std::ceil(cutoff / h[i]) + 1;
    images *= 2 * r + 1;
    range[i] = static_cast<int>(std::min(r, 1e6));
  }
  if (images * n > 5e7)
    throw InvalidInput("cell too thin for cutoff " + std::to_string(cutoff) +
                       " (would scan " + std::to_string(images) + " images per atom pair)");

  struct Candidate {
    double length;
    Translation shift;
    int src;
  };
  auto key = [](const Candidate& c) { return std::tie(c.length, c.shift, c.src); };

  std::set<std::tuple<int, int, Translation>> kept;  // (src, dst, shift)
  std::vector<Candidate> cands;
  for (int dst = 0; dst < n; ++dst) {
    cands.clear();
    for (int src = 0; src < n; ++src) {
      Eigen::RowVector3d base = cart.row(src) - cart.row(dst);
      for (int i = -range[0]; i <= range[0]; ++i)
        for (int j = -range[1]; j <= range[1]; ++j)
          for (int k = -range[2]; k <= range[2]; ++k) {
            if (src == dst && i == 0 && j == 0 && k == 0)
              continue;
            Eigen::RowVector3d v = base + i * m.row(0) + j * m.row(1) + k * m.row(2);
            double d = v.norm();
            if (d > cutoff)
              continue;
            if (d < 1e-10)
              throw DegenerateStructure("atoms " + std::to_string(src) + " and " +
                                        std::to_string(dst) + " coincide");
            cands.push_back({d, {i, j, k}, src});
          }
    }
    std::sort(cands.begin(), cands.end(),
              [&](const Candidate& a, const Candidate& b) { return key(a) < key(b); });
    int keep = std::min<int>(max_neighbors, static_cast<int>(cands.size()));
    for (int c = 0; c < keep; ++c) {
      kept.insert({cands[c].src, dst, cands[c].shift});
      kept.insert({dst, cands[c].src, detail::negate(cands[c].shift)});
    }
  }

  PeriodicGraph g;
  g.num_nodes = n;
  g.edges.reserve(kept.size());
  for (const auto& [src, dst, t] : kept) {
    Eigen::RowVector3d v = cart.row(src) - cart.row(dst) + t[0] * m.row(0) +
                           t[1] * m.row(1) + t[2] * m.row(2);
    g.edges.push_back({src, dst, t, v, v.norm()});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.dst, a.length, a.shift, a.src) <
           std::tie(b.dst, b.length, b.shift, b.src);
  });
  return g;
}

inline PeriodicGraph build_periodic_graph(const CrystalStructure& s, double cutoff,
                                          int max_neighbors) {
  return build_periodic_graph(s.lattice(), s.frac_coords(), cutoff, max_neighbors);
}

}  // namespace dpcdvae
#endif
