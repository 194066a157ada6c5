#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "../support/ground_truth.hpp"
#include "support/oracles.hpp"
#include "caris/mapping/mapper.hpp"
#include "caris/sim/simulator.hpp"

using namespace caris;
using namespace caris::mapping;

using caris::testing::arc_about_center;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact rational for the segment parameter, compared by cross-multiplying.
struct Frac {
  long num;
  long den;  // > 0
  bool operator<(const Frac& o) const { return num * o.den < o.num * den; }
};

// Open interval of t in which the coordinate lies strictly inside the cell
// slab around `c`. Returns nullopt-equivalent via `empty`.
struct Slab {
  bool all = false;
  bool empty = false;
  Frac lo{0, 1}, hi{0, 1};
};

Slab slab(int a0, int a1, int c) {
  const int d = a1 - a0;
  if (d == 0) return a0 == c ? Slab{true, false} : Slab{false, true};
  Frac a{2L * c - 1 - 2L * a0, 2L * d};
  Frac b{2L * c + 1 - 2L * a0, 2L * d};
  if (d < 0) {
    a = {-a.num, -a.den};
    b = {-b.num, -b.den};
  }
  return d > 0 ? Slab{false, false, a, b} : Slab{false, false, b, a};
}

// Cells whose open interior meets the closed segment between two centers.
std::set<std::pair<int, int>> supercover_oracle(const Cell& p, const Cell& q) {
  std::set<std::pair<int, int>> out;
  for (int x = std::min(p.x(), q.x()); x <= std::max(p.x(), q.x()); ++x) {
    for (int y = std::min(p.y(), q.y()); y <= std::max(p.y(), q.y()); ++y) {
      const Slab sx = slab(p.x(), q.x(), x);
      const Slab sy = slab(p.y(), q.y(), y);
      if (sx.empty || sy.empty) continue;
      Frac lo{-1, 1}, hi{2, 1};
      if (!sx.all) {
        lo = std::max(lo, sx.lo);
        hi = std::min(hi, sx.hi);
      }
      if (!sy.all) {
        lo = std::max(lo, sy.lo);
        hi = std::min(hi, sy.hi);
      }
      if (lo < hi && lo < Frac{1, 1} && Frac{0, 1} < hi) out.emplace(x, y);
    }
  }
  return out;
}

std::set<std::pair<int, int>> beam_cells(const OccupancyGrid& grid, const Pose2D& pose, double angle,
                                         double range) {
  std::set<std::pair<int, int>> cells;
  const Cell start = grid.cell_of(pose.x, pose.y);
  const double reach = range + kEndpointNudge * grid.resolution();
  const Cell end = grid.cell_of(pose.x + reach * std::cos(angle), pose.y + reach * std::sin(angle));
  walk_line(start, end, [&](const Cell& c) {
    if (!grid.contains(c)) return false;
    cells.emplace(c.x(), c.y());
    return true;
  });
  return cells;
}

cv::Mat decode(const std::vector<std::uint8_t>& png) {
  return cv::imdecode(png, cv::IMREAD_UNCHANGED);
}

}  // namespace

TEST_SUITE("odometry") {
  TEST_CASE("examples") {
    const Pose2D a = integrate_odometry({0, 0, 0}, {1.0, 0.0}, 1.0);
    CHECK(a.x == doctest::Approx(1.0));
    CHECK(a.y == doctest::Approx(0.0));
    const Pose2D b = integrate_odometry({0, 0, 0}, {0.0, kPi / 2}, 1.0);
    CHECK(b.x == doctest::Approx(0.0));
    CHECK(b.theta == doctest::Approx(kPi / 2));
    CHECK_THROWS_AS(integrate_odometry({0, 0, 0}, {1.0, 0.0}, 0.0), InvalidInterval);
    CHECK_THROWS_AS(integrate_odometry({0, 0, 0}, {1.0, 0.0}, -0.1), InvalidInterval);
  }

  TEST_CASE("property: dead reckoning matches simulator kinematics on 10^4 samples") {
    sim::World field;
    field.width = 1000.0;
    field.height = 1000.0;
    field.spawn = {500.0, 500.0, 0.0};
    sim::SimParams params;
    params.robot_radius = 0.0;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> pos(450.0, 550.0), th(-kPi, kPi), v(-1.0, 1.0), w(-2.0, 2.0),
        dt(1e-3, 0.2);
    for (int i = 0; i < 10000; ++i) {
      sim::SimState s;
      s.pose = {pos(rng), pos(rng), th(rng)};
      s.commanded = {v(rng), i % 10 == 0 ? 0.0 : w(rng)};
      const double h = dt(rng);
      const Pose2D mapped = integrate_odometry(s.pose, s.commanded, h);
      const Pose2D simulated = sim::step(s, field, params, h).pose;
      REQUIRE(std::abs(mapped.x - simulated.x) <= 1e-9);
      REQUIRE(std::abs(mapped.y - simulated.y) <= 1e-9);
      REQUIRE(std::abs(normalize_angle(mapped.theta - simulated.theta)) <= 1e-9);
      const Pose2D oracle = arc_about_center(s.pose, s.commanded.linear, s.commanded.angular, h);
      REQUIRE(std::abs(mapped.x - oracle.x) <= 1e-9);
      REQUIRE(std::abs(mapped.y - oracle.y) <= 1e-9);
      REQUIRE(std::abs(normalize_angle(mapped.theta - oracle.theta)) <= 1e-9);
    }
  }
}

TEST_SUITE("line walk") {
  TEST_CASE("axis-aligned and diagonal examples") {
    CHECK(line_cells({0, 0}, {3, 0}).size() == 4);
    const auto diag = line_cells({0, 0}, {2, 2});
    REQUIRE(diag.size() == 3);
    CHECK(diag[1] == Cell(1, 1));
    CHECK(line_cells({5, 5}, {5, 5}).size() == 1);
  }

  TEST_CASE("property: the walk equals the supercover oracle on grids up to 64 x 64") {
    std::mt19937 rng(7);
    for (int n : {1, 2, 5, 17, 64}) {
      std::uniform_int_distribution<int> coord(0, n - 1);
      for (int i = 0; i < 600; ++i) {
        const Cell p(coord(rng), coord(rng));
        const Cell q(coord(rng), coord(rng));
        const auto cells = line_cells(p, q);
        REQUIRE(cells.front() == p);
        REQUIRE(cells.back() == q);
        std::set<std::pair<int, int>> walked;
        for (std::size_t k = 0; k < cells.size(); ++k) {
          walked.emplace(cells[k].x(), cells[k].y());
          if (k > 0) {
            const Cell d = cells[k] - cells[k - 1];
            REQUIRE(std::abs(d.x()) <= 1);
            REQUIRE(std::abs(d.y()) <= 1);
            REQUIRE(d != Cell(0, 0));
          }
        }
        REQUIRE(walked.size() == cells.size());
        REQUIRE(walked == supercover_oracle(p, q));
      }
    }
  }
}

TEST_SUITE("occupancy grid") {
  TEST_CASE("single beam marks free cells then the hit cell") {
    OccupancyGrid grid(0.05, {0, 0, 0}, 100, 100);
    const Pose2D pose{10.5 * 0.05, 10.5 * 0.05, 0.0};
    integrate_beam(grid, pose, 0.0, 1.0, true);
    // 0.525 + 1.0 lands in column 30.
    for (int x = 10; x < 30; ++x) CHECK(grid.at(x, 10) == doctest::Approx(-0.4));
    CHECK(grid.at(30, 10) == doctest::Approx(0.85));
    CHECK(grid.at(31, 10) == 0.0);
    CHECK(grid.at(10, 11) == 0.0);
  }

  TEST_CASE("beam without a return clears up to range_max") {
    OccupancyGrid grid(0.1, {0, 0, 0}, 50, 50);
    integrate_beam(grid, {0.05, 0.05, 0.0}, 0.0, 2.0, false);
    for (int x = 0; x <= 20; ++x) CHECK(grid.at(x, 0) == doctest::Approx(-0.4));
    CHECK(grid.at(21, 0) == 0.0);
  }

  TEST_CASE("repeated beams saturate at the clamp bounds") {
    OccupancyGrid grid(0.05, {0, 0, 0}, 100, 100);
    const Pose2D pose{0.525, 0.525, 0.0};
    for (int i = 0; i < 50; ++i) integrate_beam(grid, pose, 0.0, 1.0, true);
    CHECK(grid.at(30, 10) == 10.0);
    CHECK(grid.at(20, 10) == -10.0);
    CHECK(grid.classify(Cell(30, 10)) == CellClass::Occupied);
    CHECK(grid.classify(Cell(20, 10)) == CellClass::Free);
    CHECK(grid.classify(Cell(50, 50)) == CellClass::Unknown);
  }

  TEST_CASE("property: log-odds stay within the clamp bounds") {
    OccupancyGrid grid(0.1, {0, 0, 0}, 40, 40);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> pos(0.5, 3.5), ang(-kPi, kPi), range(0.0, 3.0);
    for (int i = 0; i < 3000; ++i) {
      integrate_beam(grid, {pos(rng), pos(rng), 0.0}, ang(rng), range(rng), i % 3 != 0);
    }
    CHECK(grid.logodds().maxCoeff() <= 10.0);
    CHECK(grid.logodds().minCoeff() >= -10.0);
  }

  TEST_CASE("property: beams over disjoint cells commute") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pos(0.2, 3.8), ang(-kPi, kPi), range(0.0, 1.5);
    int checked = 0;
    while (checked < 300) {
      OccupancyGrid base(0.1, {0, 0, 0}, 40, 40);
      const Pose2D pa{pos(rng), pos(rng), 0.0}, pb{pos(rng), pos(rng), 0.0};
      const double aa = ang(rng), ab = ang(rng), ra = range(rng), rb = range(rng);
      const auto ca = beam_cells(base, pa, aa, ra);
      const auto cb = beam_cells(base, pb, ab, rb);
      std::vector<std::pair<int, int>> common;
      std::set_intersection(ca.begin(), ca.end(), cb.begin(), cb.end(), std::back_inserter(common));
      if (!common.empty()) continue;
      OccupancyGrid ab_grid = base, ba_grid = base;
      integrate_beam(ab_grid, pa, aa, ra, true);
      integrate_beam(ab_grid, pb, ab, rb, true);
      integrate_beam(ba_grid, pb, ab, rb, true);
      integrate_beam(ba_grid, pa, aa, ra, true);
      REQUIRE(ab_grid == ba_grid);
      ++checked;
    }
  }

  TEST_CASE("a pose outside the grid is rejected") {
    OccupancyGrid grid(0.05, {0, 0, 0}, 10, 10);
    const auto scan = bridge::make_scan_geometry(4, 8.0);
    bridge::LaserScan s = scan;
    s.ranges.assign(4, 1.0);
    CHECK_THROWS_AS(update_grid(grid, {5.0, 5.0, 0.0}, s), PoseOutOfBounds);
  }
}

TEST_SUITE("rendering and persistence") {
  TEST_CASE("a fresh grid renders uniformly gray") {
    OccupancyGrid grid(0.05, {0, 0, 0}, 30, 20);
    const cv::Mat image = decode(render_map(grid));
    REQUIRE(image.rows == 20);
    REQUIRE(image.cols == 30);
    REQUIRE(image.channels() == 1);
    CHECK(cv::countNonZero(image != kUnknownPixel) == 0);
  }

  TEST_CASE("one occupied cell renders as one black pixel") {
    OccupancyGrid grid(0.05, {0, 0, 0}, 30, 20);
    grid.add(Cell(7, 4), 5.0);
    grid.add(Cell(2, 3), -5.0);
    const cv::Mat image = decode(render_map(grid));
    CHECK(cv::countNonZero(image == kOccupiedPixel) == 1);
    CHECK(image.at<std::uint8_t>(4, 7) == kOccupiedPixel);
    CHECK(image.at<std::uint8_t>(3, 2) == kFreePixel);
  }

  TEST_CASE("save and load round-trip exactly") {
    OccupancyGrid grid(0.05, {-0.5, -0.25, 0.0}, 13, 7);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> val(-10.0, 10.0);
    for (int x = 0; x < 13; ++x)
      for (int y = 0; y < 7; ++y) grid.add(Cell(x, y), val(rng));
    const auto dir = std::filesystem::temp_directory_path() / "caris_grid_test";
    std::filesystem::create_directories(dir);
    save_grid(grid, dir / "map");
    const OccupancyGrid loaded = load_grid(dir / "map");
    CHECK(loaded == grid);
    std::filesystem::resize_file(std::filesystem::path(dir / "map").concat(".bin"), 16);
    CHECK_THROWS_AS(load_grid(dir / "map"), GridFormatError);
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("mapper") {
  TEST_CASE("dead reckons from commands until odometry arrives") {
    MapperConfig config;
    config.origin = {-5, -5, 0};
    config.width = 200;
    config.height = 200;
    Mapper mapper(config);
    const Pose2D start = mapper.pose();
    mapper.on_command({0.5, 0.0}, 1.0);
    mapper.on_command({0.0, 0.0}, 3.0);
    CHECK(mapper.pose().x == doctest::Approx(start.x + 1.0));
    bridge::Odometry odom;
    odom.pose = {1.0, 2.0, 0.5};
    mapper.on_odometry(odom);
    mapper.on_command({0.5, 0.0}, 4.0);
    mapper.on_command({0.5, 0.0}, 6.0);
    CHECK(mapper.pose() == odom.pose);
  }

  TEST_CASE("snapshots are immutable") {
    MapperConfig config;
    config.origin = {-0.5, -0.5, 0};
    config.width = config.height = 100;
    Mapper mapper(config);
    bridge::Odometry odom;
    odom.pose = {2.0, 2.0, 0.0};
    mapper.on_odometry(odom);
    const auto before = mapper.snapshot();
    CHECK(mapper.on_scan(sim::raycast_scan(odom.pose, sim::World{}, {})));
    CHECK(mapper.version() == 1);
    CHECK((before->logodds() == 0.0).all());
    CHECK_FALSE((mapper.snapshot()->logodds() == 0.0).all());
  }

  TEST_CASE("square room maps walls occupied and the interior free") {
    const sim::World room;  // 4 x 4, no obstacles
    sim::Simulator simulator(room, sim::SimParams{});
    MapperConfig config;
    config.origin = {-0.5, -0.5, 0};
    config.width = config.height = 100;
    Mapper mapper(config);
    int scans = 0;
    simulator.on_odometry = [&](const bridge::Odometry& o) { mapper.on_odometry(o); };
    simulator.on_scan = [&](const bridge::LaserScan& s) {
      mapper.on_odometry(simulator.current_odometry());
      mapper.on_scan(s);
      ++scans;
    };
    while (scans < 50) {
      simulator.set_command({0.3, 0.4});
      simulator.advance();
    }
    const auto grid = mapper.snapshot();
    const auto raster = testing::rasterize_room(*grid, room);
    REQUIRE(raster.wall.size() == 320);
    const auto fidelity = testing::measure(*grid, raster);
    CHECK(fidelity.wall_occupied >= 0.95);
    CHECK(fidelity.interior_free >= 0.95);

    // Occupied pixels outline the room to within one cell.
    const cv::Mat image = decode(render_map(*grid));
    std::vector<cv::Point> black;
    cv::findNonZero(image == kOccupiedPixel, black);
    REQUIRE_FALSE(black.empty());
    const cv::Rect box = cv::boundingRect(black);
    CHECK(std::abs(box.x - 9) <= 1);
    CHECK(std::abs(box.y - 9) <= 1);
    CHECK(std::abs(box.x + box.width - 1 - 90) <= 1);
    CHECK(std::abs(box.y + box.height - 1 - 90) <= 1);
  }
}
