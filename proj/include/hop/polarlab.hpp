#pragma once

#include <string>
#include <vector>

#include "hop/types.hpp"

namespace hop::polarlab {

enum class Mode { kTruncate, kDynamicLr, kReconnect };
enum class Objective { kShiftedQuadratic, kTwoWell };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& name);
const char* objective_name(Objective o);
Objective parse_objective(const std::string& name);

struct PolarSimConfig {
  Mode mode = Mode::kTruncate;
  double lr = 0.3;
  double momentum = 0.0;  // heavy-ball on (r, θ)
  double alpha = 0.1;     // radial step α·r_t in dynamic_lr mode
  int steps = 200;
  double r0 = 1.0;
  double theta0 = 0.0;
  Objective objective = Objective::kShiftedQuadratic;
};

void validate(const PolarSimConfig& cfg);

struct Point {
  int step = 0;
  double r = 0.0;
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;
  double f = 0.0;
};

/// (x+1)² + y² or (x²-1)² + y².
double objective_value(Objective o, double x, double y);
Eigen::Vector2d objective_gradient(Objective o, double x, double y);

/// Row 0 is the start; one row per step after it.
std::vector<Point> simulate(const PolarSimConfig& cfg);

std::string trajectory_csv(const std::vector<Point>& traj);
void export_trajectory(const std::vector<Point>& traj, const std::string& path);

}  // namespace hop::polarlab
