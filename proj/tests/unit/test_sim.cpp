#include <doctest.h>

#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include "caris/bridge/client.hpp"
#include "caris/sim/server.hpp"
#include "caris/sim/simulator.hpp"

using namespace caris;
using namespace caris::sim;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent route for the arc: rotate the start point about the
// instantaneous center of rotation.
Pose2D arc_about_center(const Pose2D& p, double v, double w, double dt) {
  const double r = v / w;
  const double cx = p.x - r * std::sin(p.theta);
  const double cy = p.y + r * std::cos(p.theta);
  const double angle = w * dt;
  const double ox = p.x - cx;
  const double oy = p.y - cy;
  return {cx + ox * std::cos(angle) - oy * std::sin(angle), cy + ox * std::sin(angle) + oy * std::cos(angle),
          normalize_angle(p.theta + angle)};
}

// Classical RK4 on the unicycle ODE with many substeps.
Pose2D integrate_rk4(Pose2D p, double v, double w, double dt, int substeps) {
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    auto f = [&](double theta) { return std::array<double, 3>{v * std::cos(theta), v * std::sin(theta), w}; };
    const auto k1 = f(p.theta);
    const auto k2 = f(p.theta + 0.5 * h * k1[2]);
    const auto k3 = f(p.theta + 0.5 * h * k2[2]);
    const auto k4 = f(p.theta + h * k3[2]);
    p.x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    p.y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    p.theta += h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
  }
  p.theta = normalize_angle(p.theta);
  return p;
}

// Distance along a ray to the nearest of the room's four wall segments,
// by solving each ray/segment intersection as a 2x2 linear system.
double ray_to_walls(double width, double height, double x, double y, double angle) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const std::array<std::array<double, 4>, 4> walls{{
      {0, 0, width, 0}, {width, 0, width, height}, {width, height, 0, height}, {0, height, 0, 0}}};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : walls) {
    const double ex = w[2] - w[0];
    const double ey = w[3] - w[1];
    const double det = dx * (-ey) - dy * (-ex);
    if (std::abs(det) < 1e-15) continue;
    const double rx = w[0] - x;
    const double ry = w[1] - y;
    const double t = (rx * (-ey) - ry * (-ex)) / det;
    const double s = (dx * ry - dy * rx) / det;
    if (t >= 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12) best = std::min(best, t);
  }
  return best;
}

template <typename Pred>
bool wait_for(Pred pred, std::chrono::milliseconds timeout = std::chrono::milliseconds(3000)) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!pred()) {
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return true;
}

World open_field() {
  World w;
  w.width = 100.0;
  w.height = 100.0;
  w.spawn = {50.0, 50.0, 0.0};
  return w;
}

SimState at(const Pose2D& pose, const TwistCommand& twist) {
  SimState s;
  s.pose = pose;
  s.commanded = twist;
  return s;
}

}  // namespace

TEST_SUITE("sim.kinematics") {
  TEST_CASE("zero twist leaves the pose unchanged") {
    const Pose2D p{0.0, 0.0, 0.0};
    CHECK(unicycle_step(p, TwistCommand{0.0, 0.0}, 1.0) == p);
    SimParams params;
    params.command_timeout = 10.0;
    const SimState next = step(at({50, 50, 0.3}, {}), open_field(), params, 1.0);
    CHECK(next.pose == Pose2D{50, 50, 0.3});
    CHECK(next.clock == 1.0);
  }

  TEST_CASE("straight line") {
    const Pose2D p = unicycle_step(Pose2D{0, 0, 0}, TwistCommand{1.0, 0.0}, 1.0);
    CHECK(p.x == 1.0);
    CHECK(p.y == 0.0);
    CHECK(p.theta == 0.0);
    SimParams params;
    params.command_timeout = 10.0;
    const SimState next = step(at({50, 50, 0}, {1.0, 0.0}), open_field(), params, 1.0);
    CHECK(next.pose.x == 51.0);
    CHECK(next.pose.y == 50.0);
  }

  TEST_CASE("quarter arc lands on (1, 1, pi/2)") {
    const Pose2D p = unicycle_step(Pose2D{0, 0, 0}, TwistCommand{kPi / 2, kPi / 2}, 1.0);
    const Pose2D oracle = arc_about_center({0, 0, 0}, kPi / 2, kPi / 2, 1.0);
    CHECK(oracle.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(oracle.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p.x - 1.0) < 1e-9);
    CHECK(std::abs(p.y - 1.0) < 1e-9);
    CHECK(std::abs(p.theta - kPi / 2) < 1e-9);
  }

  TEST_CASE("arc formula agrees with rotation about the center and with RK4") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> pos(-5, 5), ang(-kPi, kPi), vel(-1, 1), rate(-2, 2), dt(0.01, 1.0);
    for (int i = 0; i < 2000; ++i) {
      const Pose2D p{pos(rng), pos(rng), ang(rng)};
      const double v = vel(rng);
      double w = rate(rng);
      if (std::abs(w) < 1e-3) w = 1e-3;
      const double h = dt(rng);
      const Pose2D got = unicycle_step(p, TwistCommand{v, w}, h);
      const Pose2D center = arc_about_center(p, v, w, h);
      const Pose2D rk4 = integrate_rk4(p, v, w, h, 200);
      REQUIRE(std::abs(got.x - center.x) < 1e-9);
      REQUIRE(std::abs(got.y - center.y) < 1e-9);
      REQUIRE(std::abs(normalize_angle(got.theta - center.theta)) < 1e-9);
      REQUIRE(std::abs(got.x - rk4.x) < 1e-7);
      REQUIRE(std::abs(got.y - rk4.y) < 1e-7);
    }
  }

  TEST_CASE("heading stays in (-pi, pi]") {
    CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(2 * kPi) == doctest::Approx(0.0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> any(-100, 100);
    for (int i = 0; i < 10000; ++i) {
      const double t = normalize_angle(any(rng));
      REQUIRE(t > -kPi);
      REQUIRE(t <= kPi);
    }
  }

  TEST_CASE("straight-line distance over n steps is |v| n dt") {
    SimParams params;
    params.command_timeout = 1e9;
    SimState s = at({1.0, 50.0, 0.0}, {0.7, 0.0});
    const int n = 1000;
    for (int i = 0; i < n; ++i) s = step(s, open_field(), params, params.dt);
    CHECK(std::abs((s.pose.x - 1.0) - 0.7 * n * params.dt) < 1e-9 * n);
    CHECK(s.pose.y == 50.0);
  }

  TEST_CASE("command expires after the timeout") {
    Simulator sim(open_field(), SimParams{});
    sim.set_command({1.0, 0.0});
    sim.advance(40);
    // 0.5 s timeout at 0.05 s steps -> exactly 10 steps of motion.
    CHECK(sim.state().pose.x == doctest::Approx(50.0 + 0.5));
    CHECK(sim.state().commanded == TwistCommand{});
  }

  TEST_CASE("collision cancels motion and zeroes the command") {
    World room;  // 4 x 4, spawn at the center
    SimParams params;
    params.command_timeout = 1e9;
    SimState s = at({3.7, 2.0, 0.0}, {1.0, 0.0});
    const SimState next = step(s, room, params, 0.5);
    CHECK(next.pose == s.pose);
    CHECK(next.commanded == TwistCommand{});
    CHECK(next.clock == doctest::Approx(0.5));
  }

  TEST_CASE("property: pose never enters an obstacle") {
    World w;
    w.width = 6;
    w.height = 6;
    w.obstacles = {{1.0, 1.0, 2.0, 2.0}, {4.0, 3.5, 5.0, 5.5}, {2.5, 4.0, 3.0, 4.5}};
    w.spawn = {3.0, 3.0, 0.0};
    SimParams params;
    Simulator sim(w, params);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> v(-0.6, 0.6), om(-1.5, 1.5);
    for (int i = 0; i < 20000; ++i) {
      if (i % 7 == 0) sim.set_command({v(rng), om(rng)});
      sim.advance(1);
      const Pose2D& p = sim.state().pose;
      REQUIRE_FALSE(blocked(w, p.x, p.y, params.robot_radius - 1e-9));
    }
  }
}

TEST_SUITE("sim.lidar") {
  TEST_CASE("beam along +x from the center of a 4 x 4 room reads 2 m") {
    World room;
    const Pose2D center{2.0, 2.0, 0.0};
    CHECK(std::abs(cast_ray(room, 2.0, 2.0, 0.0) - ray_to_walls(4, 4, 2, 2, 0)) < 1e-12);
    const bridge::LaserScan scan = raycast_scan(center, room, ScanParams{});
    // Beam 180 points along +x in the robot frame (angle_min = -pi).
    CHECK(std::abs(scan.beam_angle(180)) < 1e-12);
    CHECK(std::abs(scan.ranges[180] - 2.0) < 1e-6);
  }

  TEST_CASE("every beam matches the wall-segment oracle") {
    World room;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(0.3, 3.7), ang(-kPi, kPi);
    for (int k = 0; k < 50; ++k) {
      const Pose2D pose{pos(rng), pos(rng), ang(rng)};
      const bridge::LaserScan scan = raycast_scan(pose, room, ScanParams{});
      for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double expected = ray_to_walls(4, 4, pose.x, pose.y, pose.theta + scan.beam_angle(i));
        REQUIRE(std::abs(scan.ranges[i] - expected) < 1e-6);
      }
    }
  }

  TEST_CASE("obstacles shadow the walls") {
    World w;
    w.obstacles = {{3.0, 1.5, 3.5, 2.5}};
    w.spawn = {1.0, 2.0, 0.0};
    CHECK(cast_ray(w, 1.0, 2.0, 0.0) == doctest::Approx(2.0));
    CHECK(cast_ray(w, 1.0, 2.0, kPi) == doctest::Approx(1.0));
  }

  TEST_CASE("walls beyond range_max read as no return") {
    World big;
    big.width = 20;
    big.height = 20;
    big.spawn = {10, 10, 0};
    const bridge::LaserScan scan = raycast_scan(big.spawn, big, ScanParams{});
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) CHECK_FALSE(scan.has_return(i));
  }

  TEST_CASE("square room scan is symmetric under a quarter turn") {
    World room;
    const bridge::LaserScan scan = raycast_scan({2.0, 2.0, 0.0}, room, ScanParams{});
    REQUIRE(scan.ranges.size() == 360);
    for (std::size_t i = 0; i < 360; ++i) REQUIRE(std::abs(scan.ranges[i] - scan.ranges[(i + 90) % 360]) < 1e-9);
  }
}

TEST_SUITE("sim.determinism") {
  TEST_CASE("same world, seed and schedule give identical frames") {
    auto run = [] {
      SimParams params;
      params.scan.range_noise_stddev = 0.01;
      params.seed = 1234;
      Simulator sim(World{}, params);
      std::vector<std::string> frames;
      sim.on_scan = [&](const bridge::LaserScan& s) {
        frames.push_back(bridge::encode_message(bridge::BridgeMessage::publish("/scan", bridge::scan_to_msg(s))));
      };
      sim.on_odometry = [&](const bridge::Odometry& o) {
        frames.push_back(bridge::encode_message(bridge::BridgeMessage::publish("/odom", bridge::odometry_to_msg(o))));
      };
      for (int i = 0; i < 100; ++i) {
        if (i % 5 == 0) sim.set_command({0.2, (i % 3 - 1) * 0.4});
        sim.advance(1);
      }
      return std::make_pair(frames, sim.state());
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first.size() == 150);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  TEST_CASE("worlds load from JSON and reject bad layouts") {
    const World w = load_world(std::string(CARIS_SOURCE_DIR) + "/worlds/room_4x4.json");
    CHECK(w.width == 4.0);
    CHECK(w.height == 4.0);
    CHECK(world_from_json(world_to_json(w)) == w);
    Json bad = world_to_json(w);
    bad["obstacles"] = Json::array({Json::array({3.0, 3.0, 5.0, 5.0})});
    CHECK_THROWS_AS(validate(world_from_json(bad)), InvalidWorld);
    Json blocked_spawn = world_to_json(w);
    blocked_spawn["obstacles"] = Json::array({Json::array({1.5, 1.5, 2.5, 2.5})});
    CHECK_THROWS_AS(validate(world_from_json(blocked_spawn)), InvalidWorld);
  }
}

TEST_SUITE("sim.server") {
  TEST_CASE("held forward command advances odometry by about 0.3 m per second") {
    SimServer server(World{}, SimParams{}, SimServer::Options{});
    server.start();
    auto client = bridge::BridgeClient::connect(server.url());
    std::mutex mutex;
    std::vector<bridge::Odometry> odoms;
    client->subscribe_odom([&](const bridge::Odometry& o) {
      std::lock_guard lock(mutex);
      odoms.push_back(o);
    });
    REQUIRE(wait_for([&] {
      std::lock_guard lock(mutex);
      return !odoms.empty();
    }));
    const double x0 = server.state().pose.x;
    const double t0 = server.state().clock;
    // Keyboard-style teleop: the key stays down, the command is refreshed.
    for (int i = 0; i < 10; ++i) {
      client->publish_twist({0.3, 0.0});
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    const SimState s = server.state();
    // Kinematics oracle at fixed dt: distance = v * (sim time elapsed while moving).
    const double moved = s.pose.x - x0;
    CHECK(moved == doctest::Approx(0.3 * (s.clock - t0)).epsilon(0.1));
    CHECK(moved == doctest::Approx(0.3).epsilon(0.2));
    std::lock_guard lock(mutex);
    CHECK(odoms.back().pose.x > x0 + 0.2);
  }

  TEST_CASE("two clients receive identical scan streams") {
    SimServer::Options options;
    options.realtime = false;
    SimServer server(World{}, SimParams{}, options);
    server.start();
    auto a = bridge::BridgeClient::connect(server.url());
    auto b = bridge::BridgeClient::connect(server.url());
    std::mutex mutex;
    std::vector<std::string> frames_a, frames_b;
    a->subscribe("/scan", bridge::kLaserScanType, [&](const bridge::BridgeMessage& m) {
      std::lock_guard lock(mutex);
      frames_a.push_back(bridge::encode_message(m));
    });
    b->subscribe("/scan", bridge::kLaserScanType, [&](const bridge::BridgeMessage& m) {
      std::lock_guard lock(mutex);
      frames_b.push_back(bridge::encode_message(m));
    });
    REQUIRE(wait_for([&] { return server.client_count() == 2; }));
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    a->publish_twist({0.1, 0.2});
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    server.advance(20);
    REQUIRE(wait_for([&] {
      std::lock_guard lock(mutex);
      return frames_a.size() == 10 && frames_b.size() == 10;
    }));
    std::lock_guard lock(mutex);
    CHECK(frames_a == frames_b);
  }

  TEST_CASE("lockstep clock advances through the step topic") {
    SimServer::Options options;
    options.realtime = false;
    SimServer server(World{}, SimParams{}, options);
    server.start();
    auto client = bridge::BridgeClient::connect(server.url());
    client->publish(bridge::BridgeMessage::publish(kStepTopic, Json{{"steps", 7}}));
    REQUIRE(wait_for([&] { return server.state().steps == 7; }));
    CHECK(server.state().clock == doctest::Approx(0.35));
  }

  TEST_CASE("binding a taken port throws BindError") {
    SimServer first(World{}, SimParams{}, SimServer::Options{});
    SimServer::Options clash;
    clash.port = first.port();
    CHECK_THROWS_AS(SimServer(World{}, SimParams{}, clash), BindError);
  }
}
