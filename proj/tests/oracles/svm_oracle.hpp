#pragma once

// Exact soft-margin dual for a handful of points: every split of the
// multipliers into {0, free, C} is tried, the free ones and the bias are solved
// from the margin equalities, and the feasible KKT point with the largest dual
// objective is returned. Exponential in n, so only for n <= 8.

#include <cmath>
#include <optional>
#include <vector>

namespace oracle {

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double objective = 0.0;
  bool bias_unique = true;  // false when no multiplier is free and any bias in an interval is optimal
};

namespace detail {

inline std::optional<std::vector<double>> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-12) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

}  // namespace detail

inline std::optional<DualSolution> exact_dual(const std::vector<std::vector<double>>& k, const std::vector<int>& y,
                                              double c) {
  const std::size_t n = y.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  std::optional<DualSolution> best;
  const double eps = 1e-9;
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<int> state(n);  // 0 lower, 1 free, 2 upper
    std::size_t rest = code;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = static_cast<int>(rest % 3);
      rest /= 3;
      if (state[i] == 1) free.push_back(i);
    }
    if (free.empty()) {
      // All multipliers at a bound: feasible iff sum y alpha = 0 and some bias satisfies every margin.
      std::vector<double> alpha(n, 0.0);
      double balance = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (state[i] == 2) alpha[i] = c;
        balance += alpha[i] * y[i];
      }
      if (std::abs(balance) > eps) continue;
      double lo = -1e300, hi = 1e300;
      for (std::size_t i = 0; i < n; ++i) {
        double g = 0.0;
        for (std::size_t j = 0; j < n; ++j) g += alpha[j] * y[j] * k[i][j];
        // Needs y (g + b) >= 1 at alpha = 0 and <= 1 at alpha = C; with y = +-1 the edge is b = y - g.
        const bool at_least = state[i] == 0;
        const double edge = y[i] - g;
        if ((y[i] > 0) == at_least) {
          lo = std::max(lo, edge);
        } else {
          hi = std::min(hi, edge);
        }
      }
      if (lo > hi + 1e-9) continue;
      double obj = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        obj += alpha[i];
        for (std::size_t j = 0; j < n; ++j) obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
      }
      if (!best || obj > best->objective) best = DualSolution{alpha, 0.5 * (lo + hi), obj, false};
      continue;
    }
    const std::size_t m = free.size();
    std::vector<std::vector<double>> a(m + 1, std::vector<double>(m + 1, 0.0));
    std::vector<double> rhs(m + 1, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = free[r];
      for (std::size_t s = 0; s < m; ++s) a[r][s] = y[i] * y[free[s]] * k[i][free[s]];
      a[r][m] = y[i];
      rhs[r] = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (state[j] == 2) rhs[r] -= y[i] * y[j] * k[i][j] * c;
      }
    }
    for (std::size_t s = 0; s < m; ++s) a[m][s] = y[free[s]];
    for (std::size_t j = 0; j < n; ++j) {
      if (state[j] == 2) rhs[m] -= y[j] * c;
    }
    const auto sol = detail::solve_linear(a, rhs);
    if (!sol) continue;

    std::vector<double> alpha(n, 0.0);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 2) alpha[i] = c;
    }
    for (std::size_t s = 0; s < m; ++s) {
      alpha[free[s]] = (*sol)[s];
      if ((*sol)[s] <= eps || (*sol)[s] >= c - eps) ok = false;
    }
    if (!ok) continue;
    const double b = (*sol)[m];
    for (std::size_t i = 0; i < n && ok; ++i) {
      double f = b;
      for (std::size_t j = 0; j < n; ++j) f += alpha[j] * y[j] * k[i][j];
      const double margin = y[i] * f;
      if (state[i] == 0 && margin < 1.0 - 1e-7) ok = false;
      if (state[i] == 2 && margin > 1.0 + 1e-7) ok = false;
    }
    if (!ok) continue;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      obj += alpha[i];
      for (std::size_t j = 0; j < n; ++j) obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
    }
    if (!best || obj > best->objective) best = DualSolution{alpha, b, obj, true};
  }
  return best;
}

}  // namespace oracle
