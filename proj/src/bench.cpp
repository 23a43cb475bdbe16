#include "hop/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hop::bench {

namespace {

constexpr std::uint64_t kFixedStream = std::numeric_limits<std::uint64_t>::max();

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vector uniform_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

Vector normal_vec(std::mt19937_64& rng, int n, double mean = 0.0) {
  std::normal_distribution<double> g(mean, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

void finish(Dataset& ds) {
  ds.n_train = train_count(static_cast<int>(ds.instances.size()));
  for (int i = 0; i < static_cast<int>(ds.instances.size()); ++i) ds.instances[static_cast<std::size_t>(i)].index = i;
}

void require_n(int n) {
  if (n <= 0) throw Error(ErrorCode::kInvalidArgument, "dataset size must be positive");
}

// SINR_k - ω_k and its gradient in w̄, for one user.
double sinr_margin(const MisoWSR& raw, const Vector& w, int k, double omega, Vector* grad) {
  const int m2 = 2 * raw.antennas;
  const Matrix& H = raw.h_tilde[static_cast<std::size_t>(k)];
  double signal = 0.0;
  double interference = raw.sigma2;
  for (int j = 0; j < raw.users; ++j) {
    const Vector wj = w.segment(j * m2, m2);
    (j == k ? signal : interference) += wj.dot(H * wj);
  }
  if (grad) {
    grad->setZero(w.size());
    for (int j = 0; j < raw.users; ++j) {
      const Vector hw = 2.0 * H * w.segment(j * m2, m2);
      grad->segment(j * m2, m2) = j == k ? Vector(hw / interference)
                                         : Vector(-signal / (interference * interference) * hw);
    }
  }
  return signal / interference - omega;
}

// Adam on raw codes through the map, one row per (instance, start). The best
// iterate per row is tracked, the starting codes included.
struct CodeSearch {
  std::vector<const ProblemInstance*> rows;
  Matrix z;
  int steps = 0;
  double lr = 1e-2;
  mapping::MapConfig map;
};

std::vector<OracleResult> run_code_search(const CodeSearch& s) {
  const auto n = static_cast<Eigen::Index>(s.rows.size());
  std::vector<OracleResult> best(static_cast<std::size_t>(n));
  for (auto& b : best) b.f = std::numeric_limits<double>::infinity();
  std::vector<mapping::RayTarget> targets;
  for (const auto* inst : s.rows) targets.push_back({&inst->set, &inst->y0});
  Matrix z = s.z;
  learning::AdamState adam = learning::adam_init({&z}, learning::AdamConfig{s.lr});
  for (int step = 0; step <= s.steps; ++step) {
    ad::Tape tape;
    const ad::NodeId zp = tape.parameter(z);
    const mapping::MapNodes mapped = mapping::hop_map(tape, zp, targets, s.map);
    const ad::NodeId f = objective_node(tape, mapped.y, s.rows);
    const Matrix& fv = tape.value(f);
    const Matrix& yv = tape.value(mapped.y);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fv(i, 0) < best[static_cast<std::size_t>(i)].f) {
        best[static_cast<std::size_t>(i)].f = fv(i, 0);
        best[static_cast<std::size_t>(i)].y = yv.row(i).transpose();
      }
    }
    if (step == s.steps) break;
    const ad::Gradients g = ad::backward(tape, ad::sum(tape, f));
    learning::adam_step(adam, {&z}, {g.wrt(zp)});
  }
  return best;
}

// Raw code for direction v and radial fraction zbar (z_r >= 0 branch).
RowVector raw_code(const Vector& v, double zbar) {
  RowVector r(v.size() + 1);
  r.head(v.size()) = v.transpose();
  r(v.size()) = std::atanh(zbar);
  return r;
}

}  // namespace

int train_count(int n) { return static_cast<int>(std::floor(kTrainFraction * n)); }

std::uint64_t stream_seed(std::uint64_t seed, Family family, std::uint64_t index, std::uint64_t attempt) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(family));
  h = splitmix(h ^ index);
  return splitmix(h ^ attempt);
}

Matrix octagon_normals() {
  Matrix A(8, 2);
  for (int i = 0; i < 8; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 8.0;
    A(i, 0) = std::cos(a);
    A(i, 1) = std::sin(a);
  }
  return A;
}

Matrix random_pd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = g(rng);
  Matrix Q = G.transpose() * G + Matrix::Identity(d, d);
  return 0.5 * (Q + Q.transpose());
}

Dataset gen_polygon_dataset(int n, std::uint64_t seed, const GenConfig& cfg) {
  require_n(n);
  Dataset ds;
  ds.family = Family::kPolygon;
  ds.seed = seed;
  std::mt19937_64 fixed(stream_seed(seed, ds.family, kFixedStream, 0));
  const Matrix Q = random_pd(fixed, 2);
  const Matrix A = octagon_normals();
  const Vector p_fixed = Vector::Constant(2, 30.0);
  for (int i = 0; i < n; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      std::mt19937_64 rng(stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt)));
      const Vector b = uniform_vec(rng, 8, 0.0, 2.0);
      const Vector q = uniform_vec(rng, 2, 0.0, 2.0);
      geometry::ChebyshevBall ball;
      try {
        ball = geometry::chebyshev_center(A, b);
      } catch (const Error&) {
        ++ds.rejected;
        continue;
      }
      if (ball.radius < 1e-3) {
        ++ds.rejected;
        continue;
      }
      ProblemInstance inst;
      inst.family = ds.family;
      inst.x.resize(10);
      inst.x << b, q;
      inst.objective = SinusoidalQP{Q, p_fixed.cwiseProduct(q), cfg.beta};
      inst.set = geometry::make_halfspaces(A, b);
      inst.y0 = ball.center;
      inst.seed = stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt));
      ds.instances.push_back(std::move(inst));
      accepted = true;
    }
    if (!accepted) throw Error(ErrorCode::kGenerationExhausted, "polygon generation exhausted its retry budget");
  }
  finish(ds);
  return ds;
}

Dataset gen_lp_dataset(int n, std::uint64_t seed, const GenConfig&) {
  require_n(n);
  Dataset ds;
  ds.family = Family::kLp;
  ds.seed = seed;
  std::mt19937_64 fixed(stream_seed(seed, ds.family, kFixedStream, 0));
  const Matrix Q = random_pd(fixed, 2);
  const geometry::ConstraintSet set = geometry::make_lp_ball(0.5, 1.0, Vector::Zero(2));
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), 0));
    ProblemInstance inst;
    inst.family = ds.family;
    const Vector p = normal_vec(rng, 2);
    inst.x = p;
    inst.objective = QPObjective{Q, p};
    inst.set = set;
    inst.y0 = Vector::Zero(2);
    inst.seed = stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), 0);
    ds.instances.push_back(std::move(inst));
  }
  finish(ds);
  return ds;
}

Dataset gen_highdim_dataset(int n, int d, std::uint64_t seed, const GenConfig& cfg) {
  require_n(n);
  if (d < 2) throw Error(ErrorCode::kInvalidArgument, "high-dimensional family needs d >= 2");
  Dataset ds;
  ds.family = Family::kHighdim;
  ds.seed = seed;
  std::mt19937_64 fixed(stream_seed(seed, ds.family, kFixedStream, static_cast<std::uint64_t>(d)));
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = g(fixed);
  const Matrix Q = random_pd(fixed, d);
  const geometry::ConstraintSet set = geometry::make_halfspaces(A, Vector::Ones(d));
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), 0));
    ProblemInstance inst;
    inst.family = ds.family;
    const Vector p = normal_vec(rng, d, -10.0);
    inst.x = p;
    inst.objective = SinusoidalQP{Q, p, cfg.highdim_beta};
    inst.set = set;
    inst.y0 = Vector::Zero(d);
    inst.seed = stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), 0);
    ds.instances.push_back(std::move(inst));
  }
  finish(ds);
  return ds;
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double linear_power_budget(double p_max_dbm, double p_c_dbm) {
  return dbm_to_mw(p_max_dbm) - dbm_to_mw(p_c_dbm);
}

Matrix splice_channel(const Vector& h_re, const Vector& h_im) {
  if (h_re.size() != h_im.size()) throw Error(ErrorCode::kDimensionMismatch, "splice_channel: shape mismatch");
  const Eigen::VectorXcd h = h_re.cast<std::complex<double>>() + std::complex<double>(0, 1) * h_im.cast<std::complex<double>>();
  const Eigen::MatrixXcd G = h * h.adjoint();
  const auto M = h.size();
  Matrix H(2 * M, 2 * M);
  H.topLeftCorner(M, M) = G.real();
  H.topRightCorner(M, M) = -G.imag();
  H.bottomLeftCorner(M, M) = G.imag();
  H.bottomRightCorner(M, M) = G.real();
  return H;
}

void build_h_tilde(MisoWSR& raw) {
  raw.h_tilde.clear();
  for (int k = 0; k < raw.users; ++k) {
    raw.h_tilde.push_back(splice_channel(raw.h_re.row(k).transpose(), raw.h_im.row(k).transpose()));
  }
}

geometry::ConstraintSet miso_reformulate(const MisoWSR& raw) {
  const double p_lin = linear_power_budget(raw.p_max_dbm, raw.p_c_dbm);
  if (!(p_lin > 0.0)) throw Error(ErrorCode::kInvalidArgument, "miso_reformulate: P_max must exceed P_c");
  if (static_cast<int>(raw.h_tilde.size()) != raw.users) {
    throw Error(ErrorCode::kInvalidArgument, "miso_reformulate: spliced channels missing");
  }
  const int m2 = 2 * raw.antennas;
  const int n = m2 * raw.users;
  std::vector<geometry::QuadraticForm> geq;
  for (int k = 0; k < raw.users; ++k) {
    const double omega = std::exp2(raw.delta(k)) - 1.0;
    Matrix Hbar = Matrix::Zero(n, n);
    for (int j = 0; j < raw.users; ++j) {
      const double f = j == k ? 1.0 : -omega;
      Hbar.block(j * m2, j * m2, m2, m2) = f * raw.h_tilde[static_cast<std::size_t>(k)];
    }
    geq.push_back({std::move(Hbar), omega * raw.sigma2});
  }
  return geometry::make_quadratic_set(std::move(geq), {geometry::QuadraticForm{Matrix::Identity(n, n), p_lin}});
}

Vector miso_features(const MisoWSR& raw) {
  const int m2 = 2 * raw.antennas;
  Vector x(raw.users * m2 * m2 + 2 * raw.users);
  Eigen::Index o = 0;
  for (const Matrix& H : raw.h_tilde) {
    for (int i = 0; i < m2; ++i)
      for (int j = 0; j < m2; ++j) x(o++) = H(i, j);
  }
  x.segment(o, raw.users) = raw.alpha;
  x.segment(o + raw.users, raw.users) = raw.delta;
  return x;
}

InteriorPointResult miso_interior_point(const geometry::ConstraintSet& set, const MisoWSR& raw, std::uint64_t seed) {
  const int m2 = 2 * raw.antennas;
  const double radius = std::sqrt(0.5 * linear_power_budget(raw.p_max_dbm, raw.p_c_dbm));
  Vector omega(raw.users);
  for (int k = 0; k < raw.users; ++k) omega(k) = std::exp2(raw.delta(k)) - 1.0;

  Vector w(raw.users * m2);
  for (int k = 0; k < raw.users; ++k) {
    Vector hk(m2);
    hk << raw.h_re.row(k).transpose(), raw.h_im.row(k).transpose();
    w.segment(k * m2, m2) = hk / hk.norm();
  }
  w *= radius / w.norm();

  auto worst = [&](const Vector& p, int* arg) {
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k < raw.users; ++k) {
      const double mk = sinr_margin(raw, p, k, omega(k), nullptr);
      if (mk < m) {
        m = mk;
        if (arg) *arg = k;
      }
    }
    return m;
  };

  std::mt19937_64 rng(seed);
  InteriorPointResult out;
  int k = 0;
  double margin = worst(w, &k);
  double step = 0.1 * radius;
  while (margin < 1e-3 && out.steps < 500) {
    ++out.steps;
    Vector grad;
    sinr_margin(raw, w, k, omega(k), &grad);
    // Project the ascent direction onto the tangent space of the sphere.
    grad -= grad.dot(w) / w.squaredNorm() * w;
    if (grad.norm() < 1e-14) grad = normal_vec(rng, static_cast<int>(w.size()));
    Vector cand = w + step * grad.normalized();
    cand *= radius / cand.norm();
    int kc = 0;
    const double mc = worst(cand, &kc);
    if (mc > margin) {
      w = cand;
      margin = mc;
      k = kc;
      step = std::min(2.0 * step, radius);
    } else {
      step *= 0.5;
      if (step < 1e-9 * radius) step = 0.1 * radius;
    }
  }
  if (margin < 1e-3 || !(geometry::interior_margin(set, w) > 0.0)) {
    throw Error(ErrorCode::kInfeasible, "miso_interior_point: no strictly feasible beamformer found");
  }
  out.y0 = w;
  out.margin = margin;
  return out;
}

Dataset gen_miso_dataset(int n, int users, int antennas, std::uint64_t seed, const GenConfig& cfg) {
  require_n(n);
  if (users < 1 || antennas < 1) throw Error(ErrorCode::kInvalidArgument, "MISO needs U, M >= 1");
  Dataset ds;
  ds.family = Family::kMiso;
  ds.seed = seed;
  for (int i = 0; i < n; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      const std::uint64_t s = stream_seed(seed, ds.family, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt));
      std::mt19937_64 rng(s);
      MisoWSR raw;
      raw.users = users;
      raw.antennas = antennas;
      raw.sigma2 = 1e3 * cfg.sigma2_w;
      raw.p_max_dbm = cfg.p_max_dbm;
      raw.p_c_dbm = cfg.p_c_dbm;
      std::normal_distribution<double> g(0.0, std::pow(10.0, -cfg.pathloss_db / 20.0));
      raw.h_re.resize(users, antennas);
      raw.h_im.resize(users, antennas);
      for (int k = 0; k < users; ++k) {
        for (int m = 0; m < antennas; ++m) {
          raw.h_re(k, m) = g(rng);
          raw.h_im(k, m) = g(rng);
        }
      }
      raw.alpha = uniform_vec(rng, users, 0.0, 1.0);
      raw.alpha /= raw.alpha.sum();
      raw.delta = uniform_vec(rng, users, 0.0, 1.0 / 3.0);
      build_h_tilde(raw);
      ProblemInstance inst;
      inst.family = ds.family;
      inst.set = miso_reformulate(raw);
      try {
        inst.y0 = miso_interior_point(inst.set, raw, s).y0;
      } catch (const Error&) {
        ++ds.rejected;
        continue;
      }
      inst.x = miso_features(raw);
      inst.objective = std::move(raw);
      inst.seed = s;
      ds.instances.push_back(std::move(inst));
      accepted = true;
    }
    if (!accepted) throw Error(ErrorCode::kGenerationExhausted, "MISO generation exhausted its retry budget");
  }
  finish(ds);
  return ds;
}

Dataset generate(Family family, const GenConfig& cfg) {
  switch (family) {
    case Family::kPolygon: return gen_polygon_dataset(cfg.n, cfg.seed, cfg);
    case Family::kLp: return gen_lp_dataset(cfg.n, cfg.seed, cfg);
    case Family::kHighdim: return gen_highdim_dataset(cfg.n, cfg.dim, cfg.seed, cfg);
    case Family::kMiso: return gen_miso_dataset(cfg.n, cfg.users, cfg.antennas, cfg.seed, cfg);
  }
  throw Error(ErrorCode::kInvalidArgument, "generate: unknown family");
}

std::vector<OracleResult> grid_oracle_2d(const std::vector<ProblemInstance>& data, int begin, int end,
                                         const GridOracleConfig& cfg) {
  if (cfg.n_theta < 1 || cfg.n_r < 1 || cfg.refine_steps < 0) {
    throw Error(ErrorCode::kInvalidArgument, "grid_oracle_2d: grid sizes must be positive");
  }
  const mapping::MapConfig map;
  CodeSearch search;
  search.steps = cfg.refine_steps;
  search.lr = cfg.refine_lr;
  search.z.resize(end - begin, 3);
  for (int i = begin; i < end; ++i) {
    const ProblemInstance& inst = data[static_cast<std::size_t>(i)];
    if (solution_dim(inst) != 2) throw Error(ErrorCode::kDimensionMismatch, "grid_oracle_2d: d must be 2");
    double best = std::numeric_limits<double>::infinity();
    RowVector code;
    for (int a = 0; a < cfg.n_theta; ++a) {
      const double th = 2.0 * std::numbers::pi * a / cfg.n_theta;
      Vector v(2);
      v << std::cos(th), std::sin(th);
      if (!geometry::boundary_distance(inst.set, inst.y0, v).finite()) {
        throw Error(ErrorCode::kUnbounded, "grid_oracle_2d: set must be bounded");
      }
      const double phi = mapping::boundary_angle(inst.set, inst.y0, v, map);
      for (int r = 0; r < cfg.n_r; ++r) {
        // Radial fractions cluster towards the boundary.
        const double u = 1.0 - static_cast<double>(r + 1) / (cfg.n_r + 1);
        const double zbar = 1.0 - u * u;
        const Vector y = inst.y0 + v * std::tan(zbar * phi);
        const double f = objective_value(inst, y);
        if (f < best) {
          best = f;
          code = raw_code(v, zbar);
        }
      }
    }
    search.rows.push_back(&inst);
    search.z.row(i - begin) = code;
  }
  return run_code_search(search);
}

OracleResult grid_oracle_2d(const ProblemInstance& inst, int n_theta, int n_r, const GridOracleConfig& cfg) {
  GridOracleConfig c = cfg;
  c.n_theta = n_theta;
  c.n_r = n_r;
  const std::vector<ProblemInstance> one{inst};
  return grid_oracle_2d(one, 0, 1, c).front();
}

std::vector<OracleResult> polar_multistart_reference(const std::vector<ProblemInstance>& data, int begin, int end,
                                                     const MultistartConfig& cfg) {
  if (cfg.n_starts < 1 || cfg.steps < 0) {
    throw Error(ErrorCode::kInvalidArgument, "polar_multistart_reference: n_starts >= 1 and steps >= 0 required");
  }
  CodeSearch search;
  search.steps = cfg.steps;
  search.lr = cfg.lr;
  search.map = cfg.map;
  const int d = solution_dim(data[static_cast<std::size_t>(begin)]);
  search.z.resize(static_cast<Eigen::Index>(end - begin) * cfg.n_starts, d + 1);
  Eigen::Index row = 0;
  for (int i = begin; i < end; ++i) {
    const ProblemInstance& inst = data[static_cast<std::size_t>(i)];
    for (int k = 0; k < cfg.n_starts; ++k) {
      std::mt19937_64 rng(stream_seed(cfg.seed, inst.family, static_cast<std::uint64_t>(inst.index), static_cast<std::uint64_t>(k)));
      Vector z;
      do {
        z = normal_vec(rng, d + 1);
      } while (z.head(d).norm() < 1e-6);
      search.z.row(row++) = z.transpose();
      search.rows.push_back(&inst);
    }
  }
  const std::vector<OracleResult> all = run_code_search(search);
  std::vector<OracleResult> out;
  for (int i = 0; i < end - begin; ++i) {
    OracleResult best = all[static_cast<std::size_t>(i * cfg.n_starts)];
    for (int k = 1; k < cfg.n_starts; ++k) {
      const OracleResult& c = all[static_cast<std::size_t>(i * cfg.n_starts + k)];
      if (c.f < best.f) best = c;
    }
    out.push_back(std::move(best));
  }
  return out;
}

OracleResult polar_multistart_reference(const ProblemInstance& inst, int n_starts, int steps, std::uint64_t seed) {
  MultistartConfig cfg;
  cfg.n_starts = n_starts;
  cfg.steps = steps;
  cfg.seed = seed;
  const std::vector<ProblemInstance> one{inst};
  return polar_multistart_reference(one, 0, 1, cfg).front();
}

std::vector<OracleResult> reference_solutions(const Dataset& ds, int begin, int end, const LabelConfig& cfg) {
  if (begin < 0 || end > static_cast<int>(ds.instances.size()) || begin >= end) {
    throw Error(ErrorCode::kInvalidArgument, "reference_solutions: bad range");
  }
  if (ds.family == Family::kPolygon || ds.family == Family::kLp) {
    return grid_oracle_2d(ds.instances, begin, end, cfg.grid);
  }
  return polar_multistart_reference(ds.instances, begin, end, cfg.multistart);
}

void attach_labels(Dataset& ds, const LabelConfig& cfg) {
  const std::vector<OracleResult> sol = reference_solutions(ds, 0, static_cast<int>(ds.instances.size()), cfg);
  for (std::size_t i = 0; i < sol.size(); ++i) ds.instances[i].label = sol[i].y;
}

}  // namespace hop::bench
