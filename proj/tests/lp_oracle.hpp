#pragma once

// Dense two-phase simplex with Bland's rule. Test-only reference solver for
// small standard-form LPs: minimize c'x subject to A x = b, x >= 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

struct LpResult {
  double objective = 0.0;
  std::vector<double> x;
};

class Simplex {
 public:
  using Matrix = std::vector<std::vector<double>>;

  static std::optional<LpResult> solve(Matrix A, std::vector<double> b, const std::vector<double>& c) {
    const std::size_t m = A.size();
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < m; ++i) {
      if (b[i] < 0) {
        for (auto& a : A[i]) a = -a;
        b[i] = -b[i];
      }
    }
    // Tableau columns: n originals, m artificials, rhs.
    const std::size_t cols = n + m + 1;
    Matrix tab(m + 1, std::vector<double>(cols, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) tab[i][j] = A[i][j];
      tab[i][n + i] = 1.0;
      tab[i][cols - 1] = b[i];
      basis[i] = n + i;
    }
    // Phase one: minimize the sum of artificials.
    std::vector<double> phase1(n + m, 0.0);
    for (std::size_t i = 0; i < m; ++i) phase1[n + i] = 1.0;
    load_objective(tab, basis, phase1);
    if (!iterate(tab, basis, n + m)) return std::nullopt;
    if (tab[m][cols - 1] < -1e-9) return std::nullopt;  // infeasible
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < n) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(tab[i][j]) > 1e-9) {
          pivot(tab, basis, i, j);
          break;
        }
      }
    }
    std::vector<double> phase2(n + m, 0.0);
    for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
    // Forbid artificials from re-entering.
    for (std::size_t i = 0; i <= m; ++i)
      for (std::size_t j = n; j < n + m; ++j)
        if (std::find(basis.begin(), basis.end(), j) == basis.end()) tab[i][j] = 0.0;
    load_objective(tab, basis, phase2);
    if (!iterate(tab, basis, n)) return std::nullopt;  // unbounded
    LpResult r;
    r.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      if (basis[i] < n) r.x[basis[i]] = tab[i][cols - 1];
    r.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) r.objective += c[j] * r.x[j];
    return r;
  }

 private:
  // Bottom row holds reduced costs; last entry is -objective.
  static void load_objective(Matrix& tab, const std::vector<std::size_t>& basis, const std::vector<double>& cost) {
    const std::size_t m = basis.size();
    auto& z = tab[m];
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t j = 0; j < cost.size(); ++j) z[j] = cost[j];
    for (std::size_t i = 0; i < m; ++i) {
      const double cb = cost[basis[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < z.size(); ++j) z[j] -= cb * tab[i][j];
    }
  }

  static void pivot(Matrix& tab, std::vector<std::size_t>& basis, std::size_t r, std::size_t c) {
    const double pv = tab[r][c];
    for (auto& v : tab[r]) v /= pv;
    for (std::size_t i = 0; i < tab.size(); ++i) {
      if (i == r) continue;
      const double f = tab[i][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < tab[i].size(); ++j) tab[i][j] -= f * tab[r][j];
    }
    basis[r] = c;
  }

  static bool iterate(Matrix& tab, std::vector<std::size_t>& basis, std::size_t ncols) {
    const std::size_t m = basis.size();
    const std::size_t rhs = tab[0].size() - 1;
    for (int guard = 0; guard < 100000; ++guard) {
      std::size_t enter = ncols;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (tab[m][j] < -1e-11) {
          enter = j;
          break;
        }
      }
      if (enter == ncols) return true;
      std::size_t leave = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (tab[i][enter] > 1e-11) {
          const double ratio = tab[i][rhs] / tab[i][enter];
          if (leave == m || ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave == m) return false;
      pivot(tab, basis, leave, enter);
    }
    return false;
  }
};

}  // namespace oracle
