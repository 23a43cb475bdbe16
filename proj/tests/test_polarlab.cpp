#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hop/io.hpp"
#include "hop/polarlab.hpp"

using namespace hop;
using namespace hop::polarlab;

namespace {

double dist_to(const Point& p, double x, double y) { return std::hypot(p.x - x, p.y - y); }

PolarSimConfig base(Mode m) {
  PolarSimConfig cfg;
  cfg.mode = m;
  cfg.lr = 0.3;
  cfg.steps = 200;
  cfg.r0 = 1.0;
  cfg.theta0 = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("objective gradients match central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-6;
  for (Objective o : {Objective::kShiftedQuadratic, Objective::kTwoWell}) {
    for (int t = 0; t < 100; ++t) {
      const double x = u(rng), y = u(rng);
      const auto g = objective_gradient(o, x, y);
      const double gx = (objective_value(o, x + h, y) - objective_value(o, x - h, y)) / (2 * h);
      const double gy = (objective_value(o, x, y + h) - objective_value(o, x, y - h)) / (2 * h);
      CHECK(g(0) == doctest::Approx(gx).epsilon(1e-6));
      CHECK(g(1) == doctest::Approx(gy).epsilon(1e-6));
    }
  }
}

TEST_CASE("truncate mode stalls at the origin with theta frozen") {
  const auto traj = simulate(base(Mode::kTruncate));
  REQUIRE(traj.size() == 201);
  bool hit_zero = false;
  for (const auto& p : traj) {
    CHECK(p.theta == 0.0);
    CHECK(p.r >= 0.0);
    hit_zero = hit_zero || p.r == 0.0;
  }
  CHECK(hit_zero);
  CHECK(dist_to(traj.back(), -1.0, 0.0) >= 0.5);
}

TEST_CASE("truncate mode keeps theta constant once r reaches zero") {
  // target behind the start along several directions, with momentum on
  for (double theta0 : {0.0, 0.7, -2.0}) {
    PolarSimConfig cfg = base(Mode::kTruncate);
    cfg.theta0 = theta0;
    cfg.momentum = 0.5;
    cfg.objective = Objective::kShiftedQuadratic;
    const auto traj = simulate(cfg);
    int first_zero = -1;
    for (std::size_t t = 0; t < traj.size(); ++t) {
      if (traj[t].r == 0.0) {
        first_zero = static_cast<int>(t);
        break;
      }
    }
    if (first_zero < 0 || std::cos(traj[first_zero].theta) < 0.0) continue;
    for (std::size_t t = first_zero; t < traj.size(); ++t) CHECK(traj[t].theta == traj[first_zero].theta);
  }
}

TEST_CASE("reconnect mode converges to the minimiser") {
  const auto traj = simulate(base(Mode::kReconnect));
  CHECK(traj.back().f <= 1e-6);
  CHECK(dist_to(traj.back(), -1.0, 0.0) <= 1e-3);
  for (const auto& p : traj) CHECK(p.r >= 0.0);
}

TEST_CASE("reconnect trajectory is continuous in the plane") {
  for (double mu : {0.0, 0.5}) {
    PolarSimConfig cfg = base(Mode::kReconnect);
    cfg.momentum = mu;
    cfg.lr = 0.05;
    cfg.objective = Objective::kTwoWell;
    cfg.r0 = 0.3;
    cfg.theta0 = 2.5;
    const auto traj = simulate(cfg);
    double sup = 0.0;
    for (const auto& p : traj) sup = std::max(sup, objective_gradient(cfg.objective, p.x, p.y).norm());
    // polar steps scale θ by r, so bound by the radial-plus-angular move
    double rmax = 0.0;
    for (const auto& p : traj) rmax = std::max(rmax, p.r);
    const double bound = cfg.lr * sup * std::max(1.0, rmax * rmax) * std::sqrt(2.0) * (1 + mu / (1 - mu)) * 2.0;
    for (std::size_t t = 1; t < traj.size(); ++t) {
      CHECK(std::hypot(traj[t].x - traj[t - 1].x, traj[t].y - traj[t - 1].y) <= bound);
    }
  }
}

TEST_CASE("dynamic lr keeps r positive when alpha times the gradient bound is below one") {
  for (Objective o : {Objective::kShiftedQuadratic, Objective::kTwoWell}) {
    PolarSimConfig cfg = base(Mode::kDynamicLr);
    cfg.objective = o;
    cfg.steps = 500;
    cfg.r0 = 1.0;
    // the gradient stays below this on the disc of radius 2 the trajectory lives in
    const double B = o == Objective::kShiftedQuadratic ? 6.0 : 26.0;
    cfg.alpha = 0.9 / B;
    const auto traj = simulate(cfg);
    double sup = 0.0;
    for (const auto& p : traj) {
      CHECK(p.r > 0.0);
      sup = std::max(sup, objective_gradient(o, p.x, p.y).norm());
    }
    CHECK(cfg.alpha * sup < 1.0);
  }
}

TEST_CASE("simulation is deterministic and validated") {
  const auto a = simulate(base(Mode::kReconnect));
  const auto b = simulate(base(Mode::kReconnect));
  CHECK(trajectory_csv(a) == trajectory_csv(b));
  PolarSimConfig bad = base(Mode::kTruncate);
  bad.lr = 0.0;
  CHECK_THROWS_AS(simulate(bad), Error);
  bad = base(Mode::kTruncate);
  bad.steps = 0;
  CHECK_THROWS_AS(simulate(bad), Error);
  bad = base(Mode::kDynamicLr);
  bad.alpha = 0.0;
  CHECK_THROWS_AS(simulate(bad), Error);
  bad = base(Mode::kTruncate);
  bad.momentum = 1.0;
  CHECK_THROWS_AS(simulate(bad), Error);
  CHECK(parse_mode("dynamic_lr") == Mode::kDynamicLr);
  CHECK_THROWS_AS(parse_mode("nope"), Error);
}

TEST_CASE("trajectory csv export") {
  const std::string path = (std::filesystem::temp_directory_path() / "hop_test_traj.csv").string();
  export_trajectory({}, path);
  CHECK(io::read_text(path) == "step,r,theta,x,y,f\n");
  PolarSimConfig cfg = base(Mode::kTruncate);
  cfg.steps = 2;
  const auto traj = simulate(cfg);
  export_trajectory(traj, path);
  const std::string text = io::read_text(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  export_trajectory(traj, path);
  CHECK(io::read_text(path) == text);
  std::remove(path.c_str());
  CHECK_THROWS_AS(export_trajectory(traj, "/nonexistent/dir/x.csv"), Error);
}
