#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "hop/types.hpp"

namespace hop::geometry {

inline constexpr double kInteriorMargin = 1e-12;
inline constexpr double kBisectTol = 1e-10;
inline constexpr double kScanMax = 1e6;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// lo <= y <= hi in one dimension, written as constraints (lo - y, y - hi).
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// A y <= b, one constraint per row.
struct HalfspaceIntersection {
  Matrix A;
  Vector b;
};

/// sum_i |y_i - center_i|^p <= bound. Star-convex about the center for any p > 0.
struct LpBall {
  double p = 2.0;
  double bound = 1.0;
  Vector center;
};

/// yᵀ M y compared against a level.
struct QuadraticForm {
  Matrix M;
  double level = 0.0;
};

/// geq forms yᵀHy >= level, followed by leq forms yᵀMy <= level.
/// Constraint indices enumerate geq forms first.
struct QuadraticFormSet {
  std::vector<QuadraticForm> geq;
  std::vector<QuadraticForm> leq;
};

using ConstraintSet = std::variant<Interval, HalfspaceIntersection, LpBall, QuadraticFormSet>;

struct BoundaryHit {
  double distance = kInf;
  std::optional<int> active_index;

  bool finite() const { return distance < kInf; }
};

struct ChebyshevBall {
  Vector center;
  double radius = 0.0;
};

struct StarProbeReport {
  int n_rays = 0;
  int violating_ray_count = 0;  // segment_violations + reentries
  int segment_violations = 0;   // infeasible sample before the first exit
  int reentries = 0;            // feasible sample past the first exit
};

// Construction and validation. The make_* helpers validate their invariants.
ConstraintSet make_interval(double lo, double hi);
ConstraintSet make_halfspaces(Matrix A, Vector b);
ConstraintSet make_lp_ball(double p, double bound, Vector center);
ConstraintSet make_quadratic_set(std::vector<QuadraticForm> geq, std::vector<QuadraticForm> leq);
/// |y_i| <= half_width for every coordinate, rows ordered (+e1, -e1, +e2, -e2, ...).
ConstraintSet make_box(int dim, double half_width);
void validate(const ConstraintSet& set);

int dimension(const ConstraintSet& set);
int num_constraints(const ConstraintSet& set);
/// Whether every ray from an interior point is guaranteed to leave the set.
bool is_bounded_family(const ConstraintSet& set);
const char* kind_name(const ConstraintSet& set);

/// g_i(y) with the convention g_i(y) <= 0 feasible.
Vector constraint_values(const ConstraintSet& set, const Vector& y);
/// ∇g_i(y). For p < 1 the ℓp gradient is taken as 0 on coordinates equal to the center.
Vector constraint_gradient(const ConstraintSet& set, int index, const Vector& y);

bool contains(const ConstraintSet& set, const Vector& y, double tol = 0.0);
Vector violation(const ConstraintSet& set, const Vector& y);
/// min_i -g_i(y); positive means strictly feasible.
double interior_margin(const ConstraintSet& set, const Vector& y);

BoundaryHit halfspace_boundary_distance(const Matrix& A, const Vector& b, const Vector& y0,
                                        const Vector& v);
BoundaryHit lp_ball_boundary_distance(double p, double bound, const Vector& center,
                                      const Vector& y0, const Vector& v);
BoundaryHit quadratic_set_boundary_distance(const QuadraticFormSet& set, const Vector& y0,
                                            const Vector& v);
BoundaryHit boundary_distance_bisect(const ConstraintSet& set, const Vector& y0, const Vector& v,
                                     double t_max = kScanMax, double tol = kBisectTol);
/// ℛ(v, set): dispatches to the closed form of the family, bisection otherwise.
BoundaryHit boundary_distance(const ConstraintSet& set, const Vector& y0, const Vector& v);

/// Largest inscribed ball of {A y <= b} via a dense simplex on
/// max r s.t. a_i·y + r‖a_i‖ <= b_i, r >= 0.
ChebyshevBall chebyshev_center(const Matrix& A, const Vector& b);

StarProbeReport star_convexity_probe(const ConstraintSet& set, const Vector& y0, int n_rays,
                                     int n_samples, std::uint64_t seed);

// Small dense LP used by chebyshev_center: maximize cᵀx s.t. A x <= b, x >= 0.
enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Vector x;
  double objective = 0.0;
};

LpResult simplex_maximize(const Matrix& A, const Vector& b, const Vector& c);

}  // namespace hop::geometry
