#include <cmath>
#include <random>

#include "doctest.h"
#include "hop/bench.hpp"

using namespace hop;
using namespace hop::bench;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

bool same_instance(const ProblemInstance& a, const ProblemInstance& b) {
  return a.x == b.x && a.y0 == b.y0 && a.seed == b.seed && a.index == b.index &&
         geometry::constraint_values(a.set, a.y0) == geometry::constraint_values(b.set, b.y0);
}

ProblemInstance square_qp(const Vector& p) {
  ProblemInstance inst;
  inst.family = Family::kLp;
  inst.objective = QPObjective{Matrix::Identity(2, 2), p};
  inst.set = geometry::make_box(2, 1.0);
  inst.y0 = Vector::Zero(2);
  return inst;
}

}  // namespace

TEST_CASE("train split is 70/30 by index") {
  CHECK(train_count(200) == 140);
  CHECK(train_count(2000) == 1400);
  CHECK(train_count(7) == 4);
  const Dataset ds = gen_lp_dataset(10, 3);
  CHECK(ds.n_train == 7);
  for (int i = 0; i < 10; ++i) CHECK(ds.instances[static_cast<std::size_t>(i)].index == i);
}

TEST_CASE("stream seeds separate families, indices and attempts") {
  const auto s = stream_seed(1, Family::kPolygon, 0, 0);
  CHECK(s == stream_seed(1, Family::kPolygon, 0, 0));
  CHECK(s != stream_seed(2, Family::kPolygon, 0, 0));
  CHECK(s != stream_seed(1, Family::kLp, 0, 0));
  CHECK(s != stream_seed(1, Family::kPolygon, 1, 0));
  CHECK(s != stream_seed(1, Family::kPolygon, 0, 1));
}

TEST_CASE("octagon with unit offsets has its Chebyshev center at the origin") {
  const Matrix A = octagon_normals();
  const auto ball = geometry::chebyshev_center(A, Vector::Ones(8));
  CHECK(ball.center.norm() <= 1e-9);
  CHECK(ball.radius == doctest::Approx(1.0));
}

TEST_CASE("polygon generator") {
  const Dataset ds = gen_polygon_dataset(300, 7);
  CHECK(ds.instances.size() == 300);
  for (const auto& inst : ds.instances) {
    const auto& hs = std::get<geometry::HalfspaceIntersection>(inst.set);
    CHECK(hs.A == octagon_normals());
    CHECK(inst.x.size() == 10);
    CHECK(inst.x.head(8) == hs.b);
    CHECK(hs.b.minCoeff() >= 0.0);
    CHECK(hs.b.maxCoeff() <= 2.0);
    const auto ball = geometry::chebyshev_center(hs.A, hs.b);
    CHECK(ball.radius >= 1e-3);
    CHECK((ball.center - inst.y0).norm() <= 1e-9);
    const auto& obj = std::get<SinusoidalQP>(inst.objective);
    CHECK(obj.p == 30.0 * inst.x.tail(2));
    CHECK(obj.beta == 1.0);
    CHECK(obj.Q == std::get<SinusoidalQP>(ds.instances[0].objective).Q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(obj.Q);
    CHECK(es.eigenvalues().minCoeff() >= 1.0 - 1e-12);
  }
}

TEST_CASE("lp and high-dim generators") {
  const Dataset lp = gen_lp_dataset(50, 4);
  for (const auto& inst : lp.instances) {
    const auto& ball = std::get<geometry::LpBall>(inst.set);
    CHECK(ball.p == 0.5);
    CHECK(ball.bound == 1.0);
    CHECK(inst.y0 == Vector::Zero(2));
    CHECK(inst.x == std::get<QPObjective>(inst.objective).p);
  }
  const Dataset hd = gen_highdim_dataset(50, 20, 4);
  const auto& A0 = std::get<geometry::HalfspaceIntersection>(hd.instances[0].set).A;
  CHECK(A0.rows() == 20);
  double mean = 0.0;
  for (const auto& inst : hd.instances) {
    const auto& hs = std::get<geometry::HalfspaceIntersection>(inst.set);
    CHECK(hs.A == A0);
    CHECK(hs.b == Vector::Ones(20));
    CHECK(geometry::contains(inst.set, inst.y0));
    CHECK(inst.y0 == Vector::Zero(20));
    CHECK(std::get<SinusoidalQP>(inst.objective).beta == 30.0);
    mean += inst.x.mean();
  }
  CHECK(mean / 50 == doctest::Approx(-10.0).epsilon(0.02));
  CHECK_THROWS_AS(gen_highdim_dataset(0, 20, 1), Error);
  CHECK_THROWS_AS(gen_highdim_dataset(5, 1, 1), Error);
}

TEST_CASE("generation is deterministic per seed") {
  for (Family f : {Family::kPolygon, Family::kLp, Family::kHighdim, Family::kMiso}) {
    GenConfig cfg;
    cfg.n = 20;
    cfg.seed = 9;
    cfg.dim = 6;
    const Dataset a = generate(f, cfg), b = generate(f, cfg);
    REQUIRE(a.instances.size() == b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i) CHECK(same_instance(a.instances[i], b.instances[i]));
    cfg.seed = 10;
    const Dataset c = generate(f, cfg);
    CHECK_FALSE(same_instance(a.instances[1], c.instances[1]));
  }
}

TEST_CASE("every generated instance is star-convex about y0") {
  GenConfig cfg;
  cfg.n = 30;
  cfg.dim = 8;
  for (Family f : {Family::kPolygon, Family::kLp, Family::kHighdim, Family::kMiso}) {
    const Dataset ds = generate(f, cfg);
    const std::string fam = family_name(f);
    CAPTURE(fam);
    int reentering = 0;
    for (const auto& inst : ds.instances) {
      CHECK(geometry::interior_margin(inst.set, inst.y0) > 0.0);
      const auto probe = geometry::star_convexity_probe(inst.set, inst.y0, 64, 32, inst.seed);
      CHECK(probe.segment_violations == 0);
      if (f == Family::kMiso) {
        if (probe.reentries > 0) ++reentering;
      } else {
        CHECK(probe.reentries == 0);
      }
    }
    // The QoS forms are invariant under w_k -> -w_k, so some rays leave the
    // feasible set and come back; the map only ever uses the first exit.
    if (f == Family::kMiso) MESSAGE("MISO instances with re-entering rays: " << reentering << " / " << ds.instances.size());
  }
}

TEST_CASE("MISO generator and interior point") {
  const Dataset ds = gen_miso_dataset(100, 3, 4, 5);
  for (const auto& inst : ds.instances) {
    const auto& raw = std::get<MisoWSR>(inst.objective);
    CHECK(raw.alpha.minCoeff() >= 0.0);
    CHECK(raw.alpha.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(raw.delta.maxCoeff() <= 1.0 / 3.0);
    CHECK(inst.x.size() == 3 * 64 + 6);
    CHECK(inst.x.head(64) == Eigen::Map<const Vector>(raw.h_tilde[0].data(), 64));
    CHECK(geometry::contains(inst.set, inst.y0, 0.0));
    const SinrReport r = sinr_and_wsr(raw, inst.y0);
    for (int k = 0; k < 3; ++k) CHECK(r.sinr(k) - (std::exp2(raw.delta(k)) - 1.0) >= 1e-3);
    CHECK(inst.y0.squaredNorm() == doctest::Approx(0.5 * linear_power_budget(33, 30)).epsilon(1e-9));
  }
}

TEST_CASE("MISO rejection rate stays below 20% on 1000 instances") {
  const Dataset ds = gen_miso_dataset(1000, 3, 4, 123);
  MESSAGE("MISO rejections: " << ds.rejected << " / " << 1000 + ds.rejected);
  CHECK(static_cast<double>(ds.rejected) / (1000 + ds.rejected) < 0.2);
}

TEST_CASE("single-user matched beamformer is accepted at half power") {
  MisoWSR raw;
  raw.users = 1;
  raw.antennas = 3;
  raw.h_re = Matrix(1, 3);
  raw.h_im = Matrix(1, 3);
  raw.h_re << 0.2, -0.1, 0.3;
  raw.h_im << 0.1, 0.2, 0.0;
  raw.alpha = vec({1.0});
  raw.delta = vec({0.3});
  raw.sigma2 = 10.0;
  build_h_tilde(raw);
  const auto set = miso_reformulate(raw);
  const InteriorPointResult r = miso_interior_point(set, raw, 1);
  CHECK(r.steps == 0);
  CHECK(r.margin > 1e-3);
  Vector h(6);
  h << raw.h_re.row(0).transpose(), raw.h_im.row(0).transpose();
  CHECK((r.y0.normalized() - h.normalized()).norm() <= 1e-12);

  raw.delta(0) = 30.0;  // unreachable QoS
  const auto hard = miso_reformulate(raw);
  CHECK_THROWS_AS(miso_interior_point(hard, raw, 1), Error);
}

TEST_CASE("grid oracle examples") {
  const OracleResult a = grid_oracle_2d(square_qp(Vector::Zero(2)), 360, 64);
  CHECK(a.y.norm() <= 1e-3);
  CHECK(a.f <= 1e-6);

  // Unconstrained minimiser (1,1) is the corner of the unit square.
  const OracleResult b = grid_oracle_2d(square_qp(vec({-1, -1})), 360, 64);
  CHECK(std::abs(b.f - (-1.0)) <= 1e-3);
  CHECK(geometry::contains(geometry::make_box(2, 1.0), b.y));

  // Minimiser (2, 0) projects onto (1, 0), f = 0.5 - 2 = -1.5.
  const OracleResult c = grid_oracle_2d(square_qp(vec({-2, 0})), 360, 64);
  CHECK(std::abs(c.f - (-1.5)) <= 1e-3);

  ProblemInstance half = square_qp(vec({0, 0}));
  half.set = geometry::make_halfspaces(vec({1, 0}).transpose(), vec({1}));
  CHECK_THROWS_AS(grid_oracle_2d(half, 36, 8), Error);
  CHECK_THROWS_AS(grid_oracle_2d(gen_highdim_dataset(1, 3, 1).instances[0], 36, 8), Error);
}

TEST_CASE("multistart reference") {
  const Dataset ds = gen_polygon_dataset(100, 31);

  SUBCASE("zero steps returns the mapped initial code") {
    const ProblemInstance& inst = ds.instances[3];
    const OracleResult r = polar_multistart_reference(inst, 1, 0, 77);
    std::mt19937_64 rng(stream_seed(77, inst.family, 3, 0));
    std::normal_distribution<double> g(0.0, 1.0);
    Vector z(3);
    for (int i = 0; i < 3; ++i) z(i) = g(rng);
    const Vector y = mapping::spherical_map(inst.y0, mapping::reconnect(z.head(2), z(2)), inst.set);
    CHECK((r.y - y).norm() <= 1e-12);
    CHECK(r.f == doctest::Approx(objective_value(inst, y)).epsilon(1e-12));
  }

  SUBCASE("best value is non-increasing in n_starts") {
    const ProblemInstance& inst = ds.instances[5];
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= 8; ++n) {
      const double f = polar_multistart_reference(inst, n, 30, 5).f;
      CHECK(f <= prev);
      prev = f;
    }
  }

  SUBCASE("agrees with the grid oracle on 2-D instances") {
    MultistartConfig ms;
    ms.n_starts = 8;
    ms.steps = 1000;
    ms.seed = 2;
    const auto multi = polar_multistart_reference(ds.instances, 0, 100, ms);
    const auto grid = grid_oracle_2d(ds.instances, 0, 100);
    int agree = 0;
    for (int i = 0; i < 100; ++i) {
      const auto& inst = ds.instances[static_cast<std::size_t>(i)];
      CHECK(geometry::contains(inst.set, multi[static_cast<std::size_t>(i)].y));
      CHECK(geometry::contains(inst.set, grid[static_cast<std::size_t>(i)].y));
      const double rel = std::abs(multi[static_cast<std::size_t>(i)].f - grid[static_cast<std::size_t>(i)].f) /
                         std::max(1.0, std::abs(grid[static_cast<std::size_t>(i)].f));
      if (rel <= 1e-3) ++agree;
    }
    MESSAGE("multistart/grid agreement within 1e-3: " << agree << " / 100");
    CHECK(agree == 100);
  }
}

TEST_CASE("labels come from the family oracle") {
  Dataset ds = gen_lp_dataset(5, 2);
  attach_labels(ds);
  for (const auto& inst : ds.instances) {
    REQUIRE(inst.label.has_value());
    CHECK(geometry::contains(inst.set, *inst.label));
  }
  CHECK_THROWS_AS(reference_solutions(ds, 3, 2), Error);
}
