#pragma once

#include <cstdlib>
#include <vector>

#include <Eigen/Core>

namespace caris::mapping {

using Cell = Eigen::Vector2i;

/// Visits every cell whose interior the segment between the centers of
/// `from` and `to` passes through, in order from `from` to `to`.
///
/// This is the supercover variant of Bresenham's integer walk: where the
/// segment crosses a lattice corner exactly it steps diagonally, so cells
/// touched only at a corner are skipped. Returning false from the visitor
/// stops the walk early.
template <typename Visitor>
void walk_line(const Cell& from, const Cell& to, Visitor&& visit) {
  int x = from.x();
  int y = from.y();
  const int dx = std::abs(to.x() - from.x());
  const int dy = std::abs(to.y() - from.y());
  const int step_x = to.x() > from.x() ? 1 : -1;
  const int step_y = to.y() > from.y() ? 1 : -1;
  // error > 0: the next boundary crossed is vertical; < 0: horizontal.
  long error = static_cast<long>(dx) - dy;
  const long two_dx = 2L * dx;
  const long two_dy = 2L * dy;
  int remaining = 1 + dx + dy;
  while (remaining > 0) {
    if (!visit(Cell(x, y))) return;
    if (error > 0) {
      x += step_x;
      error -= two_dy;
    } else if (error < 0) {
      y += step_y;
      error += two_dx;
    } else {
      x += step_x;
      y += step_y;
      error += two_dx - two_dy;
      --remaining;
    }
    --remaining;
  }
}

inline std::vector<Cell> line_cells(const Cell& from, const Cell& to) {
  std::vector<Cell> cells;
  walk_line(from, to, [&](const Cell& c) {
    cells.push_back(c);
    return true;
  });
  return cells;
}

}  // namespace caris::mapping
