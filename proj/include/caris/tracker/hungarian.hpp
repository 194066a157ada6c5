#pragma once

#include <cmath>
#include <limits>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "caris/error.hpp"

namespace caris::tracker {

CARIS_DEFINE_ERROR(Infeasible, Error);

template <typename Scalar>
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), ascending row
  Scalar total{};
};

/// Entry value marking a pair that must never be assigned.
template <typename Scalar>
constexpr Scalar forbidden() {
  if constexpr (std::numeric_limits<Scalar>::has_infinity) {
    return std::numeric_limits<Scalar>::infinity();
  } else {
    return std::numeric_limits<Scalar>::max();
  }
}

template <typename Scalar>
constexpr bool is_forbidden(Scalar v) {
  return v == forbidden<Scalar>();
}

namespace detail {

// Shortest augmenting path with row/column potentials, O(n^2 m) for n <= m.
// Integral costs are carried in 64-bit so potentials cannot overflow.
template <typename Scalar, typename Matrix>
std::vector<int> solve_rows(const Matrix& a) {
  using Work = std::conditional_t<std::is_integral_v<Scalar>, long long, Scalar>;
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const Work unreached = std::numeric_limits<Work>::max();
  std::vector<Work> u(n + 1, 0), v(m + 1, 0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), unreached);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      Work delta = unreached;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const Scalar c = a(i0 - 1, j - 1);
        if (!is_forbidden(c)) {
          const Work cur = static_cast<Work>(c) - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 < 0) throw Infeasible("no assignment avoids forbidden pairs");
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else if (minv[j] != unreached) {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost assignment of min(rows, cols) pairs. Entries equal to
/// forbidden<Scalar>() are never assigned; throws Infeasible when every
/// full assignment would need one. The total is summed in row order.
template <typename Derived>
Assignment<typename Derived::Scalar> hungarian(const Eigen::MatrixBase<Derived>& cost) {
  using Scalar = typename Derived::Scalar;
  Assignment<Scalar> result;
  if (cost.rows() == 0 || cost.cols() == 0) return result;
  if (cost.rows() <= cost.cols()) {
    const auto cols = detail::solve_rows<Scalar>(cost.derived());
    for (int i = 0; i < static_cast<int>(cols.size()); ++i) result.pairs.emplace_back(i, cols[i]);
  } else {
    const auto rows = detail::solve_rows<Scalar>(cost.derived().transpose());
    std::vector<int> col_of(cost.rows(), -1);
    for (int j = 0; j < static_cast<int>(rows.size()); ++j) col_of[rows[j]] = j;
    for (int i = 0; i < static_cast<int>(col_of.size()); ++i) {
      if (col_of[i] >= 0) result.pairs.emplace_back(i, col_of[i]);
    }
  }
  for (const auto& [r, c] : result.pairs) result.total += cost(r, c);
  return result;
}

}  // namespace caris::tracker
