#include "hop/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace hop {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotInterior: return "not_interior";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kUnbounded: return "unbounded";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kHashMismatch: return "hash_mismatch";
    case ErrorCode::kGenerationExhausted: return "generation_exhausted";
  }
  return "unknown";
}

}  // namespace hop

namespace hop::geometry {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_dim(const ConstraintSet& set, const Vector& y, const char* what) {
  if (y.size() != dimension(set)) {
    std::ostringstream os;
    os << what << ": expected dimension " << dimension(set) << ", got " << y.size();
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
}

void require_unit(const Vector& v) {
  if (std::abs(v.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "direction must be a unit vector");
  }
}

double lp_sum(double p, const Vector& center, const Vector& y) {
  return (y - center).array().abs().pow(p).sum();
}

HalfspaceIntersection interval_as_halfspaces(const Interval& iv) {
  HalfspaceIntersection h;
  h.A.resize(2, 1);
  h.A << -1.0, 1.0;
  h.b.resize(2);
  h.b << -iv.lo, iv.hi;
  return h;
}

// Smallest t > 0 where A t² + 2 B t + C changes sign, given C > 0 at t = 0.
double first_positive_root(double a, double b, double c) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
  if (std::abs(a) <= 1e-15 * scale) {
    return b < 0.0 ? -c / (2.0 * b) : kInf;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double q = -(b + std::copysign(sq, b));
  double best = kInf;
  const double r1 = q / a;
  if (r1 > 0.0) best = std::min(best, r1);
  if (q != 0.0) {
    const double r2 = c / q;
    if (r2 > 0.0) best = std::min(best, r2);
  }
  return best;
}

}  // namespace

ConstraintSet make_interval(double lo, double hi) {
  ConstraintSet s = Interval{lo, hi};
  validate(s);
  return s;
}

ConstraintSet make_halfspaces(Matrix A, Vector b) {
  ConstraintSet s = HalfspaceIntersection{std::move(A), std::move(b)};
  validate(s);
  return s;
}

ConstraintSet make_lp_ball(double p, double bound, Vector center) {
  ConstraintSet s = LpBall{p, bound, std::move(center)};
  validate(s);
  return s;
}

ConstraintSet make_quadratic_set(std::vector<QuadraticForm> geq, std::vector<QuadraticForm> leq) {
  ConstraintSet s = QuadraticFormSet{std::move(geq), std::move(leq)};
  validate(s);
  return s;
}

ConstraintSet make_box(int dim, double half_width) {
  Matrix A = Matrix::Zero(2 * dim, dim);
  Vector b = Vector::Constant(2 * dim, half_width);
  for (int i = 0; i < dim; ++i) {
    A(2 * i, i) = 1.0;
    A(2 * i + 1, i) = -1.0;
  }
  return make_halfspaces(std::move(A), std::move(b));
}

void validate(const ConstraintSet& set) {
  std::visit(Overloaded{
                 [](const Interval& iv) {
                   if (!(iv.lo < iv.hi)) throw Error(ErrorCode::kInvalidArgument, "interval requires lo < hi");
                 },
                 [](const HalfspaceIntersection& h) {
                   if (h.A.rows() != h.b.size() || h.A.rows() == 0 || h.A.cols() == 0) {
                     throw Error(ErrorCode::kDimensionMismatch, "halfspaces: A rows must match b");
                   }
                   for (Eigen::Index i = 0; i < h.A.rows(); ++i) {
                     if (h.A.row(i).norm() == 0.0) {
                       throw Error(ErrorCode::kInvalidArgument, "halfspaces: zero row in A");
                     }
                   }
                 },
                 [](const LpBall& l) {
                   if (!(l.p > 0.0) || !(l.bound > 0.0) || l.center.size() == 0) {
                     throw Error(ErrorCode::kInvalidArgument, "lp ball requires p > 0, bound > 0");
                   }
                 },
                 [](const QuadraticFormSet& q) {
                   if (q.geq.empty() && q.leq.empty()) {
                     throw Error(ErrorCode::kInvalidArgument, "quadratic set has no forms");
                   }
                   const Eigen::Index d = q.geq.empty() ? q.leq.front().M.rows() : q.geq.front().M.rows();
                   auto check = [d](const QuadraticForm& f, bool psd) {
                     if (f.M.rows() != d || f.M.cols() != d) {
                       throw Error(ErrorCode::kDimensionMismatch, "quadratic forms must share one square shape");
                     }
                     if ((f.M - f.M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + f.M.cwiseAbs().maxCoeff())) {
                       throw Error(ErrorCode::kInvalidArgument, "quadratic form matrix must be symmetric");
                     }
                     if (psd) {
                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(f.M), Eigen::EigenvaluesOnly);
                       if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + f.M.cwiseAbs().maxCoeff())) {
                         throw Error(ErrorCode::kInvalidArgument, "leq form matrix must be PSD");
                       }
                     }
                   };
                   for (const auto& f : q.geq) check(f, false);
                   for (const auto& f : q.leq) check(f, true);
                 },
             },
             set);
}

int dimension(const ConstraintSet& set) {
  return std::visit(Overloaded{
                        [](const Interval&) { return 1; },
                        [](const HalfspaceIntersection& h) { return static_cast<int>(h.A.cols()); },
                        [](const LpBall& l) { return static_cast<int>(l.center.size()); },
                        [](const QuadraticFormSet& q) {
                          return static_cast<int>(q.geq.empty() ? q.leq.front().M.rows() : q.geq.front().M.rows());
                        },
                    },
                    set);
}

int num_constraints(const ConstraintSet& set) {
  return std::visit(Overloaded{
                        [](const Interval&) { return 2; },
                        [](const HalfspaceIntersection& h) { return static_cast<int>(h.A.rows()); },
                        [](const LpBall&) { return 1; },
                        [](const QuadraticFormSet& q) { return static_cast<int>(q.geq.size() + q.leq.size()); },
                    },
                    set);
}

bool is_bounded_family(const ConstraintSet& set) {
  return std::holds_alternative<Interval>(set) || std::holds_alternative<LpBall>(set);
}

const char* kind_name(const ConstraintSet& set) {
  return std::visit(Overloaded{
                        [](const Interval&) { return "interval"; },
                        [](const HalfspaceIntersection&) { return "halfspaces"; },
                        [](const LpBall&) { return "lp_ball"; },
                        [](const QuadraticFormSet&) { return "quadratic"; },
                    },
                    set);
}

Vector constraint_values(const ConstraintSet& set, const Vector& y) {
  require_dim(set, y, "constraint_values");
  return std::visit(Overloaded{
                        [&](const Interval& iv) {
                          Vector g(2);
                          g << iv.lo - y(0), y(0) - iv.hi;
                          return g;
                        },
                        [&](const HalfspaceIntersection& h) { return Vector(h.A * y - h.b); },
                        [&](const LpBall& l) {
                          Vector g(1);
                          g(0) = lp_sum(l.p, l.center, y) - l.bound;
                          return g;
                        },
                        [&](const QuadraticFormSet& q) {
                          Vector g(q.geq.size() + q.leq.size());
                          Eigen::Index k = 0;
                          for (const auto& f : q.geq) g(k++) = f.level - y.dot(f.M * y);
                          for (const auto& f : q.leq) g(k++) = y.dot(f.M * y) - f.level;
                          return g;
                        },
                    },
                    set);
}

Vector constraint_gradient(const ConstraintSet& set, int index, const Vector& y) {
  require_dim(set, y, "constraint_gradient");
  if (index < 0 || index >= num_constraints(set)) {
    throw Error(ErrorCode::kInvalidArgument, "constraint index out of range");
  }
  return std::visit(Overloaded{
                        [&](const Interval&) {
                          Vector g(1);
                          g(0) = index == 0 ? -1.0 : 1.0;
                          return g;
                        },
                        [&](const HalfspaceIntersection& h) { return Vector(h.A.row(index).transpose()); },
                        [&](const LpBall& l) {
                          Vector g(y.size());
                          for (Eigen::Index i = 0; i < y.size(); ++i) {
                            const double u = y(i) - l.center(i);
                            g(i) = u == 0.0 ? 0.0 : l.p * std::pow(std::abs(u), l.p - 1.0) * (u > 0.0 ? 1.0 : -1.0);
                          }
                          return g;
                        },
                        [&](const QuadraticFormSet& q) {
                          const auto n_geq = static_cast<int>(q.geq.size());
                          if (index < n_geq) return Vector(-2.0 * (q.geq[index].M * y));
                          return Vector(2.0 * (q.leq[index - n_geq].M * y));
                        },
                    },
                    set);
}

bool contains(const ConstraintSet& set, const Vector& y, double tol) {
  return (constraint_values(set, y).array() <= tol).all();
}

Vector violation(const ConstraintSet& set, const Vector& y) {
  return constraint_values(set, y).cwiseMax(0.0);
}

double interior_margin(const ConstraintSet& set, const Vector& y) {
  return -constraint_values(set, y).maxCoeff();
}

BoundaryHit halfspace_boundary_distance(const Matrix& A, const Vector& b, const Vector& y0,
                                        const Vector& v) {
  if (A.cols() != y0.size() || A.cols() != v.size() || A.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "halfspace_boundary_distance: shape mismatch");
  }
  const Vector slack = b - A * y0;
  if (slack.minCoeff() < kInteriorMargin) {
    throw Error(ErrorCode::kNotInterior, "halfspace_boundary_distance: y0 is not strictly interior");
  }
  const Vector rate = A * v;
  BoundaryHit hit;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (rate(i) <= 0.0) continue;
    const double t = slack(i) / rate(i);
    // Roots carry rounding error, so near-equal crossings count as ties.
    if (t < hit.distance * (1.0 - 1e-12)) {
      hit.distance = t;
      hit.active_index = static_cast<int>(i);
    }
  }
  return hit;
}

BoundaryHit lp_ball_boundary_distance(double p, double bound, const Vector& center, const Vector& y0,
                                      const Vector& v) {
  if (center.size() != y0.size() || center.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "lp_ball_boundary_distance: shape mismatch");
  }
  require_unit(v);
  const ConstraintSet set = make_lp_ball(p, bound, center);
  if (!contains(set, y0, 0.0)) {
    throw Error(ErrorCode::kNotInterior, "lp_ball_boundary_distance: y0 is infeasible");
  }
  if ((y0 - center).cwiseAbs().maxCoeff() == 0.0) {
    const double s = v.array().abs().pow(p).sum();
    return BoundaryHit{std::pow(bound / s, 1.0 / p), 0};
  }
  return boundary_distance_bisect(set, y0, v);
}

BoundaryHit quadratic_set_boundary_distance(const QuadraticFormSet& set, const Vector& y0,
                                            const Vector& v) {
  const ConstraintSet whole = set;
  require_dim(whole, y0, "quadratic_set_boundary_distance");
  require_dim(whole, v, "quadratic_set_boundary_distance");
  BoundaryHit hit;
  int index = 0;
  auto consider = [&](const QuadraticForm& f, double sign) {
    // h(t) = sign * (level - q(t)) >= 0 is feasible; sign = -1 for geq forms.
    const Vector Mv = f.M * v;
    const double qa = v.dot(Mv);
    const double qb = y0.dot(Mv);
    const double qc = y0.dot(f.M * y0);
    const double c = sign * (f.level - qc);
    if (c < 1e-10) {
      throw Error(ErrorCode::kNotInterior, "quadratic_set_boundary_distance: y0 is not strictly feasible");
    }
    const double t = first_positive_root(-sign * qa, -sign * qb, c);
    // Roots carry rounding error, so near-equal crossings count as ties.
    if (t < hit.distance * (1.0 - 1e-12)) {
      hit.distance = t;
      hit.active_index = index;
    }
    ++index;
  };
  for (const auto& f : set.geq) consider(f, -1.0);
  for (const auto& f : set.leq) consider(f, 1.0);

  if (!hit.finite()) {
    if (set.leq.empty()) {
      throw Error(ErrorCode::kUnbounded, "quadratic_set_boundary_distance: ray never leaves the set");
    }
    return hit;
  }
  // Roots can lose precision on near-tangent crossings; fall back to bisection
  // on [0, distance] if the point just inside is not feasible.
  if (!contains(whole, Vector(y0 + hit.distance * (1.0 - 1e-9) * v), 0.0)) {
    BoundaryHit b = boundary_distance_bisect(whole, y0, v, hit.distance, kBisectTol);
    if (b.finite()) return b;
  }
  return hit;
}

BoundaryHit boundary_distance_bisect(const ConstraintSet& set, const Vector& y0, const Vector& v,
                                     double t_max, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "boundary_distance_bisect: tol must be > 0");
  require_dim(set, y0, "boundary_distance_bisect");
  require_dim(set, v, "boundary_distance_bisect");
  if (!contains(set, y0, 0.0)) {
    throw Error(ErrorCode::kNotInterior, "boundary_distance_bisect: y0 is infeasible");
  }
  auto feasible = [&](double t) { return contains(set, Vector(y0 + t * v), 0.0); };

  double lo = 0.0;
  double hi = kInf;
  double t = std::min(1.0, t_max);
  while (true) {
    if (!feasible(t)) {
      hi = t;
      break;
    }
    lo = t;
    if (t >= t_max) break;
    t = std::min(2.0 * t, t_max);
  }
  if (hi == kInf) return BoundaryHit{};

  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Vector g = constraint_values(set, Vector(y0 + hi * v));
  Eigen::Index active = 0;
  for (Eigen::Index i = 1; i < g.size(); ++i) {
    if (g(i) > g(active)) active = i;
  }
  return BoundaryHit{lo, static_cast<int>(active)};
}

BoundaryHit boundary_distance(const ConstraintSet& set, const Vector& y0, const Vector& v) {
  return std::visit(Overloaded{
                        [&](const Interval& iv) {
                          const auto h = interval_as_halfspaces(iv);
                          return halfspace_boundary_distance(h.A, h.b, y0, v);
                        },
                        [&](const HalfspaceIntersection& h) { return halfspace_boundary_distance(h.A, h.b, y0, v); },
                        [&](const LpBall& l) { return lp_ball_boundary_distance(l.p, l.bound, l.center, y0, v); },
                        [&](const QuadraticFormSet& q) { return quadratic_set_boundary_distance(q, y0, v); },
                    },
                    set);
}

namespace {

// Tableau simplex with Bland-style tie breaking; phase one drives an auxiliary
// column (index n) out so that negative right-hand sides are handled.
class DenseSimplex {
 public:
  DenseSimplex(const Matrix& A, const Vector& b, const Vector& c)
      : m_(static_cast<int>(b.size())),
        n_(static_cast<int>(c.size())),
        basis_(m_),
        nonbasis_(n_ + 1),
        table_(Eigen::MatrixXd::Zero(m_ + 2, n_ + 2)) {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) table_(i, j) = A(i, j);
      table_(i, n_) = -1.0;
      table_(i, n_ + 1) = b(i);
      basis_[i] = n_ + i;
    }
    for (int j = 0; j < n_; ++j) {
      nonbasis_[j] = j;
      table_(m_, j) = -c(j);
    }
    nonbasis_[n_] = -1;
    table_(m_ + 1, n_) = 1.0;
  }

  LpResult solve() {
    LpResult result;
    int r = 0;
    for (int i = 1; i < m_; ++i) {
      if (table_(i, n_ + 1) < table_(r, n_ + 1)) r = i;
    }
    if (m_ > 0 && table_(r, n_ + 1) < -kEps) {
      pivot(r, n_);
      if (!run(1) || table_(m_ + 1, n_ + 1) < -kEps) {
        result.status = LpStatus::kInfeasible;
        return result;
      }
      for (int i = 0; i < m_; ++i) {
        if (basis_[i] != -1) continue;
        int s = -1;
        for (int j = 0; j <= n_; ++j) {
          if (s == -1 || table_(i, j) < table_(i, s) ||
              (table_(i, j) == table_(i, s) && nonbasis_[j] < nonbasis_[s])) {
            s = j;
          }
        }
        pivot(i, s);
      }
    }
    if (!run(2)) {
      result.status = LpStatus::kUnbounded;
      return result;
    }
    result.status = LpStatus::kOptimal;
    result.x = Vector::Zero(n_);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= 0 && basis_[i] < n_) result.x(basis_[i]) = table_(i, n_ + 1);
    }
    result.objective = table_(m_, n_ + 1);
    return result;
  }

 private:
  static constexpr double kEps = 1e-12;

  void pivot(int r, int s) {
    const double inv = 1.0 / table_(r, s);
    for (int i = 0; i < m_ + 2; ++i) {
      if (i == r) continue;
      const double f = table_(i, s) * inv;
      if (f == 0.0) continue;
      for (int j = 0; j < n_ + 2; ++j) {
        if (j != s) table_(i, j) -= table_(r, j) * f;
      }
      table_(i, s) = -f;
    }
    for (int j = 0; j < n_ + 2; ++j) {
      if (j != s) table_(r, j) *= inv;
    }
    table_(r, s) = inv;
    std::swap(basis_[r], nonbasis_[s]);
  }

  bool run(int phase) {
    const int row = phase == 1 ? m_ + 1 : m_;
    for (int iter = 0; iter < 10000; ++iter) {
      int s = -1;
      for (int j = 0; j <= n_; ++j) {
        if (phase == 2 && nonbasis_[j] == -1) continue;
        if (s == -1 || table_(row, j) < table_(row, s) ||
            (table_(row, j) == table_(row, s) && nonbasis_[j] < nonbasis_[s])) {
          s = j;
        }
      }
      if (table_(row, s) > -kEps) return true;
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (table_(i, s) < kEps) continue;
        if (r == -1) {
          r = i;
          continue;
        }
        const double lhs = table_(i, n_ + 1) / table_(i, s);
        const double rhs = table_(r, n_ + 1) / table_(r, s);
        if (lhs < rhs || (lhs == rhs && basis_[i] < basis_[r])) r = i;
      }
      if (r == -1) return false;
      pivot(r, s);
    }
    return false;
  }

  int m_;
  int n_;
  std::vector<int> basis_;
  std::vector<int> nonbasis_;
  Eigen::MatrixXd table_;
};

}  // namespace

LpResult simplex_maximize(const Matrix& A, const Vector& b, const Vector& c) {
  if (A.rows() != b.size() || A.cols() != c.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "simplex_maximize: shape mismatch");
  }
  return DenseSimplex(A, b, c).solve();
}

ChebyshevBall chebyshev_center(const Matrix& A, const Vector& b) {
  if (A.rows() != b.size() || A.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "chebyshev_center: shape mismatch");
  }
  const auto m = A.rows();
  const auto d = A.cols();
  // Free y is split as u - w; the last variable is the radius.
  Matrix lp(m, 2 * d + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = A.row(i).norm();
    if (norm == 0.0) throw Error(ErrorCode::kInvalidArgument, "chebyshev_center: zero row in A");
    lp.block(i, 0, 1, d) = A.row(i);
    lp.block(i, d, 1, d) = -A.row(i);
    lp(i, 2 * d) = norm;
  }
  Vector c = Vector::Zero(2 * d + 1);
  c(2 * d) = 1.0;
  const LpResult res = simplex_maximize(lp, b, c);
  if (res.status == LpStatus::kInfeasible) {
    throw Error(ErrorCode::kInfeasible, "chebyshev_center: polytope is empty");
  }
  if (res.status == LpStatus::kUnbounded) {
    throw Error(ErrorCode::kDegenerate, "chebyshev_center: inscribed radius is unbounded");
  }
  ChebyshevBall ball;
  ball.center = res.x.head(d) - res.x.segment(d, d);
  ball.radius = res.x(2 * d);
  if (ball.radius <= 1e-10) {
    throw Error(ErrorCode::kDegenerate, "chebyshev_center: polytope has empty interior");
  }
  return ball;
}

StarProbeReport star_convexity_probe(const ConstraintSet& set, const Vector& y0, int n_rays,
                                     int n_samples, std::uint64_t seed) {
  require_dim(set, y0, "star_convexity_probe");
  if (!contains(set, y0, 0.0)) {
    throw Error(ErrorCode::kNotInterior, "star_convexity_probe: y0 is infeasible");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  StarProbeReport report;
  report.n_rays = n_rays;
  const int d = dimension(set);
  for (int ray = 0; ray < n_rays; ++ray) {
    Vector v(d);
    do {
      for (int i = 0; i < d; ++i) v(i) = normal(rng);
    } while (v.norm() < 1e-12);
    v.normalize();
    const BoundaryHit hit = boundary_distance(set, y0, v);
    // Unbounded rays are sampled out to a fixed horizon.
    const double reach = hit.finite() ? hit.distance : 1e3;
    bool bad = false;
    for (int s = 1; s <= n_samples && !bad; ++s) {
      const double t = reach * static_cast<double>(s) / (n_samples + 1);
      bad = !contains(set, Vector(y0 + t * v), 0.0);
    }
    if (bad) {
      ++report.segment_violations;
    } else if (hit.finite()) {
      // A ray that re-enters the set after its first exit also breaks star-convexity.
      for (int s = 1; s <= n_samples && !bad; ++s) {
        const double t = hit.distance * (1.0 + 9.0 * static_cast<double>(s) / n_samples);
        bad = contains(set, Vector(y0 + t * v), 0.0);
      }
      if (bad) ++report.reentries;
    }
    if (bad) ++report.violating_ray_count;
  }
  return report;
}

}  // namespace hop::geometry
