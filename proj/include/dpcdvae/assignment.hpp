// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
// with row/column potentials, O(n^3)).

#ifndef DPCDVAE_ASSIGNMENT_HPP_
#define DPCDVAE_ASSIGNMENT_HPP_

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace dpcdvae {

struct Assignment {
  std::vector<int> col_of_row;
  double cost = 0;
};

inline Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n)
    throw InvalidInput("assignment needs a square cost matrix");
  if (!cost.allFinite())
    throw InvalidInput("assignment costs must be finite");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] is the row matched to column j, column 0 is a sentinel.
  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.col_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    a.col_of_row[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i)
    a.cost += cost(i, a.col_of_row[i]);
  return a;
}

}  // namespace dpcdvae
#endif
