#include "caris/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace caris::sim {
namespace {

// Liang-Barsky clip of the parametric segment p0 + t (p1 - p0), t in [0, 1],
// against a closed rectangle.
bool segment_hits_rect(double x0, double y0, double x1, double y1, const Rect& r) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  double t_enter = 0.0;
  double t_exit = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {x0 - r.min_x, r.max_x - x0, y0 - r.min_y, r.max_y - y0};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t_enter = std::max(t_enter, t);
    } else {
      t_exit = std::min(t_exit, t);
    }
    if (t_enter > t_exit) return false;
  }
  return true;
}

}  // namespace

void validate(const World& world, double robot_radius) {
  if (!(world.width > 0.0) || !(world.height > 0.0)) throw InvalidWorld("width and height must be positive");
  const Rect bounds{0.0, 0.0, world.width, world.height};
  for (const Rect& r : world.obstacles) {
    if (!(r.max_x > r.min_x) || !(r.max_y > r.min_y)) throw InvalidWorld("obstacle has non-positive extent");
    if (!bounds.contains(r.min_x, r.min_y) || !bounds.contains(r.max_x, r.max_y)) {
      throw InvalidWorld("obstacle outside world bounds");
    }
  }
  if (blocked(world, world.spawn.x, world.spawn.y, robot_radius)) {
    throw InvalidWorld("spawn point is blocked");
  }
}

World world_from_json(const Json& doc) {
  World world;
  try {
    world.width = doc.at("width").get<double>();
    world.height = doc.at("height").get<double>();
    if (doc.contains("obstacles")) {
      for (const Json& o : doc.at("obstacles")) {
        if (!o.is_array() || o.size() != 4) throw InvalidWorld("obstacle must be [x0, y0, x1, y1]");
        world.obstacles.push_back({o[0].get<double>(), o[1].get<double>(), o[2].get<double>(), o[3].get<double>()});
      }
    }
    if (doc.contains("spawn")) {
      const Json& s = doc.at("spawn");
      world.spawn = {s.at("x").get<double>(), s.at("y").get<double>(), s.value("theta", 0.0)};
    } else {
      world.spawn = {world.width / 2.0, world.height / 2.0, 0.0};
    }
  } catch (const Json::exception& e) {
    throw InvalidWorld(e.what());
  }
  return world;
}

Json world_to_json(const World& world) {
  Json obstacles = Json::array();
  for (const Rect& r : world.obstacles) obstacles.push_back({r.min_x, r.min_y, r.max_x, r.max_y});
  Json doc = Json::object();
  doc["width"] = world.width;
  doc["height"] = world.height;
  doc["obstacles"] = std::move(obstacles);
  doc["spawn"] = Json{{"x", world.spawn.x}, {"y", world.spawn.y}, {"theta", world.spawn.theta}};
  return doc;
}

World load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidWorld("cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidWorld(path.string() + ": " + e.what());
  }
  return world_from_json(doc);
}

bool blocked(const World& world, double x, double y, double radius) {
  if (x < radius || y < radius || x > world.width - radius || y > world.height - radius) return true;
  return std::any_of(world.obstacles.begin(), world.obstacles.end(),
                     [&](const Rect& r) { return r.inflated(radius).contains(x, y); });
}

bool segment_blocked(const World& world, double x0, double y0, double x1, double y1, double radius) {
  // The free region for the disc center is the shrunken room, which is convex,
  // so checking the endpoint suffices for the walls.
  if (blocked(world, x0, y0, radius) || blocked(world, x1, y1, radius)) return true;
  return std::any_of(world.obstacles.begin(), world.obstacles.end(),
                     [&](const Rect& r) { return segment_hits_rect(x0, y0, x1, y1, r.inflated(radius)); });
}

}  // namespace caris::sim
