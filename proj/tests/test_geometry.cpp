#include <cmath>
#include <random>

#include "doctest.h"
#include "hop/geometry.hpp"

using namespace hop;
using namespace hop::geometry;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Dense scan along the ray followed by bisection on the indicator; independent
// of the library's closed forms and its own bisection routine.
double scan_oracle(const ConstraintSet& set, const Vector& y0, const Vector& v, double t_hi, int n) {
  double lo = 0.0;
  double hi = t_hi;
  for (int k = 1; k <= n; ++k) {
    const double t = t_hi * k / n;
    if (!contains(set, y0 + t * v)) {
      hi = t;
      break;
    }
    lo = t;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (contains(set, y0 + mid * v) ? lo : hi) = mid;
  }
  return lo;
}

Vector random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = n(rng);
  return v.normalized();
}

}  // namespace

TEST_CASE("contains and violation on the spec examples") {
  const ConstraintSet square = make_box(2, 1.0);
  CHECK(contains(square, vec({0.5, -0.5}), 0.0));
  CHECK_FALSE(contains(square, vec({1.0000001, 0.0}), 1e-9));

  const ConstraintSet ball = make_lp_ball(0.5, 1.0, Vector::Zero(2));
  CHECK(contains(ball, vec({0.25, 0.25}), 0.0));

  const Vector vs = violation(square, vec({1.5, 0.0}));
  REQUIRE(vs.size() == 4);
  CHECK(vs(0) == doctest::Approx(0.5));
  CHECK(vs.tail(3).isZero());

  const Vector vb = violation(ball, vec({1.0, 1.0}));
  CHECK(vb(0) == doctest::Approx(1.0));

  const ConstraintSet cap = make_quadratic_set({}, {QuadraticForm{Matrix::Identity(2, 2), 4.0}});
  CHECK(violation(cap, vec({3.0, 0.0}))(0) == doctest::Approx(5.0));

  CHECK_THROWS_AS(contains(square, vec({1.0}), 0.0), Error);
}

TEST_CASE("set invariants are enforced") {
  CHECK_THROWS_AS(make_interval(1.0, 1.0), Error);
  CHECK_THROWS_AS(make_lp_ball(0.0, 1.0, Vector::Zero(2)), Error);
  CHECK_THROWS_AS(make_lp_ball(1.0, -1.0, Vector::Zero(2)), Error);
  Matrix A(2, 2);
  A << 1, 0, 0, 0;
  CHECK_THROWS_AS(make_halfspaces(A, vec({1, 1})), Error);
  Matrix M(2, 2);
  M << 1, 0, 0, -1;
  CHECK_THROWS_AS(make_quadratic_set({}, {QuadraticForm{M, 1.0}}), Error);
  Matrix N(2, 2);
  N << 1, 2, 0, 1;
  CHECK_THROWS_AS(make_quadratic_set({QuadraticForm{N, 1.0}}, {}), Error);
}

TEST_CASE("halfspace distance examples") {
  const ConstraintSet square = make_box(2, 1.0);
  const auto& hs = std::get<HalfspaceIntersection>(square);
  BoundaryHit hit = halfspace_boundary_distance(hs.A, hs.b, Vector::Zero(2), vec({1, 0}));
  CHECK(hit.distance == doctest::Approx(1.0));
  CHECK(*hit.active_index == 0);

  const double s = std::sqrt(2.0) / 2.0;
  hit = halfspace_boundary_distance(hs.A, hs.b, Vector::Zero(2), vec({s, s}));
  CHECK(hit.distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(*hit.active_index == 0);  // tie between y1 <= 1 and y2 <= 1

  Matrix one(1, 2);
  one << 1, 0;
  hit = halfspace_boundary_distance(one, vec({1}), Vector::Zero(2), vec({-1, 0}));
  CHECK_FALSE(hit.finite());
  CHECK_FALSE(hit.active_index.has_value());

  Matrix pair(2, 2);
  pair << 1, 0, 1, 0;
  hit = halfspace_boundary_distance(pair, vec({1, 2}), Vector::Zero(2), vec({1, 0}));
  CHECK(hit.distance == doctest::Approx(1.0));
  CHECK(*hit.active_index == 0);

  CHECK_THROWS_AS(halfspace_boundary_distance(hs.A, hs.b, vec({1, 0}), vec({1, 0})), Error);
}

TEST_CASE("lp-ball distance examples") {
  BoundaryHit hit = lp_ball_boundary_distance(0.5, 1.0, Vector::Zero(2), Vector::Zero(2), vec({1, 0}));
  CHECK(hit.distance == doctest::Approx(1.0));
  const double s = std::sqrt(2.0) / 2.0;
  hit = lp_ball_boundary_distance(0.5, 1.0, Vector::Zero(2), Vector::Zero(2), vec({s, s}));
  CHECK(std::abs(hit.distance - std::sqrt(2.0) / 4.0) < 1e-12);
  const ConstraintSet ball = make_lp_ball(0.5, 1.0, Vector::Zero(2));
  CHECK(std::abs(boundary_distance_bisect(ball, Vector::Zero(2), vec({s, s})).distance - std::sqrt(2.0) / 4.0) < 1e-10);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const Vector v = random_unit(rng, 3);
    CHECK(lp_ball_boundary_distance(2.0, 4.0, Vector::Zero(3), Vector::Zero(3), v).distance ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(lp_ball_boundary_distance(0.5, 1.0, Vector::Zero(2), Vector::Zero(2), vec({1, 1})), Error);
  CHECK_THROWS_AS(lp_ball_boundary_distance(0.5, 1.0, Vector::Zero(2), vec({2, 0}), vec({1, 0})), Error);
}

TEST_CASE("off-centre lp-ball agrees with a dense scan") {
  const ConstraintSet ball = make_lp_ball(0.5, 1.0, Vector::Zero(2));
  const Vector y0 = vec({0.1, 0.0});
  const double got = boundary_distance(ball, y0, vec({1, 0})).distance;
  CHECK(std::abs(got - scan_oracle(ball, y0, vec({1, 0}), 2.0, 20000)) < 1e-8);
  CHECK(std::abs(got - 0.9) < 1e-8);
}

TEST_CASE("quadratic set distance examples") {
  const ConstraintSet cap = make_quadratic_set({}, {QuadraticForm{Matrix::Identity(3, 3), 9.0}});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    CHECK(boundary_distance(cap, Vector::Zero(3), random_unit(rng, 3)).distance ==
          doctest::Approx(3.0).epsilon(1e-12));
  }

  Matrix H(2, 2);
  H << 1, 0, 0, -1;
  const ConstraintSet hyper = make_quadratic_set({QuadraticForm{H, 0.5}}, {});
  const BoundaryHit hit = boundary_distance(hyper, vec({1, 0}), vec({0, 1}));
  CHECK(std::abs(hit.distance - std::sqrt(0.5)) < 1e-12);
  CHECK(std::abs(hit.distance - scan_oracle(hyper, vec({1, 0}), vec({0, 1}), 2.0, 20000)) < 1e-9);
  CHECK(*hit.active_index == 0);

  // No crossing and no cap: unbounded is flagged.
  CHECK_THROWS_AS(quadratic_set_boundary_distance(std::get<QuadraticFormSet>(hyper), vec({1, 0}), vec({1, 0})),
                  Error);

  // Both forms: the smaller crossing wins; equal crossings go to the smaller index.
  const ConstraintSet both = make_quadratic_set({QuadraticForm{H, 0.5}}, {QuadraticForm{Matrix::Identity(2, 2), 1.5}});
  const BoundaryHit tie = boundary_distance(both, vec({1, 0}), vec({0, 1}));
  CHECK(std::abs(tie.distance - std::sqrt(0.5)) < 1e-12);
  CHECK(*tie.active_index == 0);
  const ConstraintSet cap_first = make_quadratic_set({QuadraticForm{H, 0.5}}, {QuadraticForm{Matrix::Identity(2, 2), 1.2}});
  CHECK(*boundary_distance(cap_first, vec({1, 0}), vec({0, 1})).active_index == 1);

  CHECK_THROWS_AS(boundary_distance(hyper, vec({0.5, 0}), vec({0, 1})), Error);
}

TEST_CASE("bisection examples") {
  const ConstraintSet square = make_box(2, 1.0);
  const BoundaryHit hit = boundary_distance_bisect(square, Vector::Zero(2), vec({1, 0}), kScanMax, 1e-10);
  CHECK(std::abs(hit.distance - 1.0) <= 1e-10);
  Matrix one(1, 2);
  one << 1, 0;
  const ConstraintSet half = make_halfspaces(one, vec({1}));
  CHECK_FALSE(boundary_distance_bisect(half, Vector::Zero(2), vec({-1, 0})).finite());
  CHECK_THROWS_AS(boundary_distance_bisect(square, Vector::Zero(2), vec({1, 0}), kScanMax, 0.0), Error);
}

TEST_CASE("chebyshev centre examples") {
  const ConstraintSet box = make_box(2, 1.0);
  const auto& sq = std::get<HalfspaceIntersection>(box);
  ChebyshevBall ball = chebyshev_center(sq.A, sq.b);
  CHECK(ball.center.norm() < 1e-9);
  CHECK(ball.radius == doctest::Approx(1.0));

  Matrix T(3, 2);
  T << -1, 0, 0, -1, 1, 1;
  const Vector tb = vec({0, 0, 1});
  ball = chebyshev_center(T, tb);
  const double r = (2.0 - std::sqrt(2.0)) / 2.0;
  CHECK(ball.radius == doctest::Approx(r).epsilon(1e-9));
  CHECK(ball.center(0) == doctest::Approx(r).epsilon(1e-9));
  CHECK(ball.center(1) == doctest::Approx(r).epsilon(1e-9));

  // Grid search over (y, r) as an independent check of the triangle radius.
  double best = 0.0;
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const Vector y = vec({0.5 * i / n, 0.5 * j / n});
      double rad = kInf;
      for (int k = 0; k < 3; ++k) rad = std::min(rad, (tb(k) - T.row(k).dot(y)) / T.row(k).norm());
      best = std::max(best, rad);
    }
  }
  CHECK(std::abs(best - ball.radius) < 5e-3);
  CHECK(best <= ball.radius + 1e-12);

  Vector shifted(4);
  shifted << 3, -1, 3, -1;
  ball = chebyshev_center(sq.A, shifted);
  CHECK((ball.center - vec({2, 2})).norm() < 1e-9);
  CHECK(ball.radius == doctest::Approx(1.0));
  CHECK(interior_margin(make_halfspaces(sq.A, shifted), ball.center) >= ball.radius * (1 - 1e-6));

  Vector empty(4);
  empty << -1, -1, 1, 1;  // y1 <= -1 and y1 >= 1
  CHECK_THROWS_AS(chebyshev_center(sq.A, empty), Error);
  Vector flat(4);
  flat << 1, 1, 0, 0;
  CHECK_THROWS_AS(chebyshev_center(sq.A, flat), Error);
}

TEST_CASE("simplex on a textbook LP") {
  Matrix A(2, 2);
  A << 1, 1, 1, 3;
  const LpResult res = simplex_maximize(A, vec({4, 6}), vec({3, 2}));
  REQUIRE(res.status == LpStatus::kOptimal);
  CHECK(res.objective == doctest::Approx(12.0));
  Matrix B(1, 1);
  B << -1;
  CHECK(simplex_maximize(B, vec({1}), vec({1})).status == LpStatus::kUnbounded);
  const LpResult lower = simplex_maximize(B, vec({-1}), vec({-1}));
  REQUIRE(lower.status == LpStatus::kOptimal);
  CHECK(lower.objective == doctest::Approx(-1.0));
  Matrix C(1, 1);
  C << 1;
  CHECK(simplex_maximize(C, vec({-1}), vec({1})).status == LpStatus::kInfeasible);
}

TEST_CASE("star convexity probe") {
  CHECK(star_convexity_probe(make_box(2, 1.0), Vector::Zero(2), 64, 32, 1).violating_ray_count == 0);
  CHECK(star_convexity_probe(make_lp_ball(0.5, 1.0, Vector::Zero(2)), Vector::Zero(2), 64, 32, 1)
            .violating_ray_count == 0);
  Matrix H(2, 2);
  H << 1, 0, 0, -1;
  const ConstraintSet hyper = make_quadratic_set({QuadraticForm{H, 0.5}}, {QuadraticForm{Matrix::Identity(2, 2), 4}});
  CHECK_THROWS_AS(star_convexity_probe(hyper, Vector::Zero(2), 8, 8, 1), Error);
  // The annulus 1 <= |y|^2 <= 4 is not star-convex about a point inside it.
  const ConstraintSet annulus = make_quadratic_set({QuadraticForm{Matrix::Identity(2, 2), 1.0}},
                                                   {QuadraticForm{Matrix::Identity(2, 2), 4.0}});
  CHECK(star_convexity_probe(annulus, vec({1.5, 0}), 64, 32, 2).violating_ray_count > 0);
}

TEST_CASE("activeness and overshoot over random polytopes, balls and quadratic sets") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + trial % 4;
    ConstraintSet set;
    Vector y0 = Vector::Zero(d);
    switch (trial % 3) {
      case 0: {
        const int m = d + 3;
        Matrix A(m, d);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < d; ++j) A(i, j) = n(rng);
        Vector b(m);
        for (int i = 0; i < m; ++i) b(i) = 0.1 + u(rng);
        set = make_halfspaces(A, b);
        break;
      }
      case 1:
        set = make_lp_ball(0.3 + 2.0 * u(rng), 0.5 + u(rng), Vector::Zero(d));
        break;
      default: {
        Matrix G(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) G(i, j) = n(rng);
        Matrix M = G.transpose() * G + Matrix::Identity(d, d);
        y0(0) = 1.0;
        Matrix H = Matrix::Zero(d, d);
        H(0, 0) = 1.0;
        for (int j = 1; j < d; ++j) H(j, j) = -0.2;
        set = make_quadratic_set({QuadraticForm{H, 0.3}}, {QuadraticForm{M, M(0, 0) * (1.5 + u(rng))}});
        break;
      }
    }
    const Vector v = random_unit(rng, d);
    const BoundaryHit hit = boundary_distance(set, y0, v);
    if (!hit.finite()) {
      if (trial % 3 != 0) ++failures;  // only random polytopes may be unbounded
      continue;
    }
    const Vector at = y0 + hit.distance * v;
    const Vector g = constraint_values(set, at);
    const bool ok = g.maxCoeff() <= 1e-8 && std::abs(g(*hit.active_index)) <= 1e-8 &&
                    !contains(set, y0 + hit.distance * (1.0 + 1e-4) * v);
    if (!ok) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("closed forms agree with bisection on 1000 random triples") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + trial % 5;
    ConstraintSet set;
    if (trial % 2 == 0) {
      const int m = 2 * d;
      Matrix A(m, d);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = n(rng);
      Vector b(m);
      for (int i = 0; i < m; ++i) b(i) = 0.2 + u(rng);
      set = make_halfspaces(A, b);
    } else {
      set = make_lp_ball(0.25 + 3.0 * u(rng), 0.5 + u(rng), Vector::Zero(d));
    }
    const Vector v = random_unit(rng, d);
    const BoundaryHit closed = boundary_distance(set, Vector::Zero(d), v);
    const BoundaryHit bis = boundary_distance_bisect(set, Vector::Zero(d), v);
    if (closed.finite() != bis.finite()) {
      worst = kInf;
      continue;
    }
    if (closed.finite()) worst = std::max(worst, std::abs(closed.distance - bis.distance));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("redundancy insensitivity and scale equivariance") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + trial % 3;
    const int m = d + 2;
    Matrix A(m, d);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) A(i, j) = n(rng);
    Vector b(m);
    for (int i = 0; i < m; ++i) b(i) = 0.1 + u(rng);
    const Vector y0 = Vector::Zero(d);
    const Vector v = random_unit(rng, d);
    const BoundaryHit base = halfspace_boundary_distance(A, b, y0, v);

    // Dominated copy of a random row: same normal, looser offset.
    Matrix A2(m + 1, d);
    A2 << A, A.row(trial % m);
    Vector b2(m + 1);
    b2 << b, b(trial % m) + 0.5 + u(rng);
    const BoundaryHit red = halfspace_boundary_distance(A2, b2, y0, v);
    REQUIRE(base.finite() == red.finite());
    if (base.finite()) CHECK(std::abs(base.distance - red.distance) <= 1e-12);

    const double s = 0.5 + 3.0 * u(rng);
    const Vector yshift = 0.01 * random_unit(rng, d);
    if (!((b - A * yshift).minCoeff() > 0)) continue;
    const BoundaryHit at = halfspace_boundary_distance(A, b, yshift, v);
    const BoundaryHit scaled = halfspace_boundary_distance(A, s * b, s * yshift, v);
    if (at.finite()) CHECK(std::abs(scaled.distance - s * at.distance) <= 1e-12 * (1 + s * at.distance));
  }
}

TEST_CASE("violation is zero exactly when contained") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const ConstraintSet sets[] = {make_box(2, 1.0), make_lp_ball(0.5, 1.0, Vector::Zero(2)),
                                make_quadratic_set({}, {QuadraticForm{Matrix::Identity(2, 2), 1.0}}),
                                make_interval(-1.0, 0.5)};
  for (const ConstraintSet& set : sets) {
    const int d = dimension(set);
    for (int i = 0; i < 500; ++i) {
      Vector y(d);
      for (int j = 0; j < d; ++j) y(j) = u(rng);
      CHECK(violation(set, y).isZero(0.0) == contains(set, y, 0.0));
    }
  }
}

TEST_CASE("constraint gradients match finite differences") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix G(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) G(i, j) = n(rng);
  const Matrix M = G.transpose() * G;
  const ConstraintSet sets[] = {make_lp_ball(0.5, 1.0, Vector::Zero(3)),
                                make_quadratic_set({QuadraticForm{M, 0.1}}, {QuadraticForm{M, 4.0}})};
  for (const ConstraintSet& set : sets) {
    const Vector y = Vector::Constant(3, 0.3) + 0.1 * random_unit(rng, 3);
    for (int k = 0; k < num_constraints(set); ++k) {
      const Vector g = constraint_gradient(set, k, y);
      for (int j = 0; j < 3; ++j) {
        Vector e = Vector::Zero(3);
        e(j) = 1e-6;
        const double fd = (constraint_values(set, y + e)(k) - constraint_values(set, y - e)(k)) / 2e-6;
        CHECK(g(j) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}
