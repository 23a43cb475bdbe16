#include "hop/polarlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include "hop/mapping.hpp"

namespace hop::polarlab {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kTruncate: return "truncate";
    case Mode::kDynamicLr: return "dynamic_lr";
    case Mode::kReconnect: return "reconnect";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "truncate") return Mode::kTruncate;
  if (name == "dynamic_lr" || name == "dynamic-lr") return Mode::kDynamicLr;
  if (name == "reconnect") return Mode::kReconnect;
  throw Error(ErrorCode::kInvalidArgument, "unknown polar mode '" + name + "'");
}

const char* objective_name(Objective o) {
  return o == Objective::kShiftedQuadratic ? "shifted_quadratic" : "two_well";
}

Objective parse_objective(const std::string& name) {
  if (name == "shifted_quadratic" || name == "quadratic") return Objective::kShiftedQuadratic;
  if (name == "two_well") return Objective::kTwoWell;
  throw Error(ErrorCode::kInvalidArgument, "unknown polar objective '" + name + "'");
}

void validate(const PolarSimConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw Error(ErrorCode::kInvalidArgument, "polarlab: lr must be positive");
  if (cfg.steps < 1) throw Error(ErrorCode::kInvalidArgument, "polarlab: steps must be >= 1");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "polarlab: momentum must lie in [0, 1)");
  }
  if (cfg.mode == Mode::kDynamicLr && !(cfg.alpha > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "polarlab: dynamic_lr needs alpha > 0");
  }
  if (!std::isfinite(cfg.r0) || !std::isfinite(cfg.theta0)) {
    throw Error(ErrorCode::kInvalidArgument, "polarlab: start must be finite");
  }
}

double objective_value(Objective o, double x, double y) {
  if (o == Objective::kShiftedQuadratic) return (x + 1.0) * (x + 1.0) + y * y;
  const double w = x * x - 1.0;
  return w * w + y * y;
}

Eigen::Vector2d objective_gradient(Objective o, double x, double y) {
  if (o == Objective::kShiftedQuadratic) return {2.0 * (x + 1.0), 2.0 * y};
  return {4.0 * x * (x * x - 1.0), 2.0 * y};
}

namespace {

Point make_point(const PolarSimConfig& cfg, int step, double r, double theta) {
  Point p;
  p.step = step;
  p.r = r;
  p.theta = theta;
  p.x = r * std::cos(theta);
  p.y = r * std::sin(theta);
  p.f = objective_value(cfg.objective, p.x, p.y);
  return p;
}

}  // namespace

std::vector<Point> simulate(const PolarSimConfig& cfg) {
  validate(cfg);
  double r = cfg.r0, theta = cfg.theta0;
  if (cfg.mode != Mode::kReconnect) r = std::max(0.0, r);
  else std::tie(r, theta) = mapping::polar_reconnect(r, theta);

  std::vector<Point> traj;
  traj.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  traj.push_back(make_point(cfg, 0, r, theta));
  double vel_r = 0.0, vel_t = 0.0;
  for (int t = 1; t <= cfg.steps; ++t) {
    const double c = std::cos(theta), s = std::sin(theta);
    const Eigen::Vector2d g = objective_gradient(cfg.objective, r * c, r * s);
    const double g_r = g(0) * c + g(1) * s;
    // zero at r = 0, which is what freezes θ
    const double g_t = r * (-g(0) * s + g(1) * c);

    if (cfg.mode != Mode::kReconnect && r == 0.0) vel_t = 0.0;
    const double lr_r = cfg.mode == Mode::kDynamicLr ? cfg.alpha * r : cfg.lr;
    vel_r = cfg.momentum * vel_r - lr_r * g_r;
    vel_t = cfg.momentum * vel_t - cfg.lr * g_t;
    r += vel_r;
    theta += vel_t;

    if (cfg.mode == Mode::kReconnect) {
      if (r < 0.0) {
        std::tie(r, theta) = mapping::polar_reconnect(r, theta);
        vel_r = -vel_r;
      }
    } else if (r < 0.0) {
      r = 0.0;
      vel_r = 0.0;
    }
    traj.push_back(make_point(cfg, t, r, theta));
  }
  return traj;
}

std::string trajectory_csv(const std::vector<Point>& traj) {
  std::string out = "step,r,theta,x,y,f\n";
  char buf[256];
  for (const auto& p : traj) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.step, p.r, p.theta, p.x, p.y, p.f);
    out += buf;
  }
  return out;
}

void export_trajectory(const std::vector<Point>& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << trajectory_csv(traj);
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

}  // namespace hop::polarlab
