#pragma once

// Test-only rasterization of a rectangular room onto a grid, used as the
// reference for mapping fidelity checks.

#include <vector>

#include "caris/mapping/occupancy_grid.hpp"
#include "caris/sim/world.hpp"

namespace caris::testing {

struct RoomRaster {
  std::vector<mapping::Cell> wall;      // just outside the room, edge-adjacent to it
  std::vector<mapping::Cell> interior;  // cells lying entirely inside the room
};

inline RoomRaster rasterize_room(const mapping::OccupancyGrid& grid, const sim::World& world) {
  RoomRaster raster;
  const double res = grid.resolution();
  auto inside = [&](int x, int y) {
    const double x0 = grid.origin().x + x * res;
    const double y0 = grid.origin().y + y * res;
    const double eps = 1e-9;
    return x0 >= -eps && y0 >= -eps && x0 + res <= world.width + eps && y0 + res <= world.height + eps;
  };
  for (int x = 0; x < grid.width(); ++x) {
    for (int y = 0; y < grid.height(); ++y) {
      if (inside(x, y)) {
        raster.interior.emplace_back(x, y);
        continue;
      }
      const bool touches = (x > 0 && inside(x - 1, y)) || (x + 1 < grid.width() && inside(x + 1, y)) ||
                           (y > 0 && inside(x, y - 1)) || (y + 1 < grid.height() && inside(x, y + 1));
      if (touches) raster.wall.emplace_back(x, y);
    }
  }
  return raster;
}

struct Fidelity {
  double wall_occupied = 0.0;
  double interior_free = 0.0;
};

inline Fidelity measure(const mapping::OccupancyGrid& grid, const RoomRaster& raster) {
  std::size_t occupied = 0;
  for (const auto& c : raster.wall) occupied += grid.classify(c) == mapping::CellClass::Occupied;
  std::size_t free = 0;
  for (const auto& c : raster.interior) free += grid.classify(c) == mapping::CellClass::Free;
  return {static_cast<double>(occupied) / static_cast<double>(raster.wall.size()),
          static_cast<double>(free) / static_cast<double>(raster.interior.size())};
}

}  // namespace caris::testing
