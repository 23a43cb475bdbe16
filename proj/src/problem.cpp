#include "hop/problem.hpp"

#include <cmath>
#include <numbers>

namespace hop::bench {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using Batch = std::vector<const ProblemInstance*>;

void require_batch(const Batch& batch, const ad::Tape& tape, ad::NodeId y, const char* where) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(where) + ": empty batch");
  if (tape.value(y).rows() != static_cast<Eigen::Index>(batch.size())) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(where) + ": one row per instance required");
  }
  for (const ProblemInstance* inst : batch) {
    if (inst->family != batch.front()->family) {
      throw Error(ErrorCode::kInvalidArgument, std::string(where) + ": mixed families in a batch");
    }
  }
}

template <class T>
const T& get_as(const ProblemInstance& inst, const char* where) {
  const T* p = std::get_if<T>(&inst.objective);
  if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, std::string(where) + ": unexpected objective kind");
  return *p;
}

template <class T>
const T& set_as(const ProblemInstance& inst, const char* where) {
  const T* p = std::get_if<T>(&inst.set);
  if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, std::string(where) + ": unexpected constraint kind");
  return *p;
}

std::shared_ptr<const std::vector<Matrix>> stack(std::vector<Matrix> mats) {
  return std::make_shared<const std::vector<Matrix>>(std::move(mats));
}

// One matrix per row, collapsed to a single shared matrix when every row agrees.
template <class Get>
std::shared_ptr<const std::vector<Matrix>> gather(const Batch& batch, Get&& get) {
  const Matrix& first = get(*batch.front());
  bool shared = true;
  for (const auto* inst : batch) {
    const Matrix& m = get(*inst);
    if (&m != &first && (m.rows() != first.rows() || m.cols() != first.cols() || m != first)) {
      shared = false;
      break;
    }
  }
  if (shared) return stack({first});
  std::vector<Matrix> mats;
  mats.reserve(batch.size());
  for (const auto* inst : batch) mats.push_back(get(*inst));
  return stack(std::move(mats));
}

ad::NodeId column(ad::Tape& tape, const Batch& batch, auto&& fn) {
  Matrix c(static_cast<Eigen::Index>(batch.size()), 1);
  for (std::size_t i = 0; i < batch.size(); ++i) c(static_cast<Eigen::Index>(i), 0) = fn(*batch[i]);
  return tape.constant(std::move(c));
}

ad::NodeId rows_of(ad::Tape& tape, const Batch& batch, auto&& fn) {
  const Vector first = fn(*batch.front());
  Matrix c(static_cast<Eigen::Index>(batch.size()), first.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vector r = fn(*batch[i]);
    if (r.size() != first.size()) throw Error(ErrorCode::kDimensionMismatch, "batch rows differ in size");
    c.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return tape.constant(std::move(c));
}

double quad(const Matrix& M, const Vector& y) { return y.dot(M * y); }

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::kPolygon: return "polygon";
    case Family::kLp: return "lp";
    case Family::kHighdim: return "highdim";
    case Family::kMiso: return "miso";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  if (name == "polygon") return Family::kPolygon;
  if (name == "lp") return Family::kLp;
  if (name == "highdim") return Family::kHighdim;
  if (name == "miso") return Family::kMiso;
  throw Error(ErrorCode::kInvalidArgument, "unknown family '" + name + "'");
}

int solution_dim(const ProblemInstance& inst) { return geometry::dimension(inst.set); }

double sinusoidal_qp(const Matrix& Q, const Vector& p, double beta, const Vector& y) {
  if (Q.rows() != y.size() || Q.cols() != y.size() || p.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "sinusoidal_qp: shape mismatch");
  }
  return 0.5 * quad(Q, y) + p.dot((beta * y).array().sin().matrix());
}

double qp_objective(const Matrix& Q, const Vector& p, const Vector& y) {
  if (Q.rows() != y.size() || Q.cols() != y.size() || p.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "qp_objective: shape mismatch");
  }
  return 0.5 * quad(Q, y) + p.dot(y);
}

SinrReport sinr_and_wsr(const MisoWSR& raw, const Vector& w) {
  if (!(raw.sigma2 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sinr_and_wsr: sigma2 must be positive");
  const int U = raw.users;
  const int m2 = 2 * raw.antennas;
  if (w.size() != U * m2) throw Error(ErrorCode::kDimensionMismatch, "sinr_and_wsr: w must have 2MU entries");
  SinrReport out;
  out.sinr.resize(U);
  for (int k = 0; k < U; ++k) {
    double signal = 0.0;
    double interference = raw.sigma2;
    for (int j = 0; j < U; ++j) {
      const Vector wj = w.segment(j * m2, m2);
      const double s = quad(raw.h_tilde[static_cast<std::size_t>(k)], wj);
      (j == k ? signal : interference) += s;
    }
    out.sinr(k) = signal / interference;
    out.wsr += raw.alpha(k) * std::log2(1.0 + out.sinr(k));
  }
  return out;
}

double objective_value(const ProblemInstance& inst, const Vector& y) {
  return std::visit(Overloaded{
                        [&](const SinusoidalQP& o) { return sinusoidal_qp(o.Q, o.p, o.beta, y); },
                        [&](const QPObjective& o) { return qp_objective(o.Q, o.p, y); },
                        [&](const MisoWSR& o) { return -sinr_and_wsr(o, y).wsr; },
                    },
                    inst.objective);
}

double reported_value(const ProblemInstance& inst, const Vector& y) {
  const double v = objective_value(inst, y);
  return reported_higher_is_better(inst.family) ? -v : v;
}

bool reported_higher_is_better(Family f) { return f == Family::kMiso; }

ad::NodeId objective_node(ad::Tape& tape, ad::NodeId y, const Batch& batch) {
  require_batch(batch, tape, y, "objective_node");
  using namespace ad;
  const ProblemInstance& first = *batch.front();
  if (std::holds_alternative<SinusoidalQP>(first.objective)) {
    const auto qs = gather(batch, [](const ProblemInstance& i) -> const Matrix& {
      return get_as<SinusoidalQP>(i, "objective_node").Q;
    });
    const NodeId quadratic = scale(tape, quadform(tape, y, qs), 0.5);
    const NodeId beta = column(tape, batch, [](const ProblemInstance& i) { return std::get<SinusoidalQP>(i.objective).beta; });
    const NodeId p = rows_of(tape, batch, [](const ProblemInstance& i) { return std::get<SinusoidalQP>(i.objective).p; });
    const NodeId wave = sum_axis(tape, mul(tape, p, ad::sin(tape, scale_rows(tape, y, beta))), Axis::kCols);
    return add(tape, quadratic, wave);
  }
  if (std::holds_alternative<QPObjective>(first.objective)) {
    const auto qs = gather(batch, [](const ProblemInstance& i) -> const Matrix& {
      return get_as<QPObjective>(i, "objective_node").Q;
    });
    const NodeId quadratic = scale(tape, quadform(tape, y, qs), 0.5);
    const NodeId p = rows_of(tape, batch, [](const ProblemInstance& i) { return std::get<QPObjective>(i.objective).p; });
    return add(tape, quadratic, dot(tape, y, p));
  }
  const MisoWSR& shape = get_as<MisoWSR>(first, "objective_node");
  const int U = shape.users;
  const int m2 = 2 * shape.antennas;
  std::vector<NodeId> parts;
  for (int j = 0; j < U; ++j) parts.push_back(slice(tape, y, j * m2, m2));
  const NodeId sigma2 = column(tape, batch, [](const ProblemInstance& i) { return std::get<MisoWSR>(i.objective).sigma2; });
  NodeId wsr{};
  for (int k = 0; k < U; ++k) {
    const auto mats = gather(batch, [&](const ProblemInstance& i) -> const Matrix& {
      const MisoWSR& o = get_as<MisoWSR>(i, "objective_node");
      if (o.users != U || 2 * o.antennas != m2) throw Error(ErrorCode::kDimensionMismatch, "objective_node: MISO sizes differ");
      return o.h_tilde[static_cast<std::size_t>(k)];
    });
    NodeId signal{};
    NodeId interference = sigma2;
    for (int j = 0; j < U; ++j) {
      const NodeId s = quadform(tape, parts[static_cast<std::size_t>(j)], mats);
      if (j == k) {
        signal = s;
      } else {
        interference = add(tape, interference, s);
      }
    }
    const NodeId alpha = column(tape, batch, [k](const ProblemInstance& i) { return std::get<MisoWSR>(i.objective).alpha(k); });
    const NodeId rate = mul(tape, alpha, scale(tape, ad::log(tape, add_scalar(tape, div(tape, signal, interference), 1.0)),
                                               1.0 / std::numbers::ln2));
    wsr = k == 0 ? rate : add(tape, wsr, rate);
  }
  return neg(tape, wsr);
}

ad::NodeId constraint_values_node(ad::Tape& tape, ad::NodeId y, const Batch& batch) {
  require_batch(batch, tape, y, "constraint_values_node");
  using namespace ad;
  const geometry::ConstraintSet& first = batch.front()->set;
  for (const auto* inst : batch) {
    if (inst->set.index() != first.index()) {
      throw Error(ErrorCode::kInvalidArgument, "constraint_values_node: mixed constraint kinds");
    }
  }
  if (std::holds_alternative<geometry::Interval>(first)) {
    const NodeId lo = column(tape, batch, [](const ProblemInstance& i) { return std::get<geometry::Interval>(i.set).lo; });
    const NodeId hi = column(tape, batch, [](const ProblemInstance& i) { return std::get<geometry::Interval>(i.set).hi; });
    return concat(tape, {sub(tape, lo, y), sub(tape, y, hi)}, Axis::kCols);
  }
  if (const auto* hs = std::get_if<geometry::HalfspaceIntersection>(&first)) {
    for (const auto* inst : batch) {
      const auto& other = set_as<geometry::HalfspaceIntersection>(*inst, "constraint_values_node");
      if (other.A.rows() != hs->A.rows() || other.A.cols() != hs->A.cols() || other.A != hs->A) {
        throw Error(ErrorCode::kInvalidArgument, "constraint_values_node: halfspace batches must share A");
      }
    }
    const NodeId b = rows_of(tape, batch, [](const ProblemInstance& i) {
      return std::get<geometry::HalfspaceIntersection>(i.set).b;
    });
    return sub(tape, matmul(tape, y, tape.constant(hs->A), true), b);
  }
  if (const auto* ball = std::get_if<geometry::LpBall>(&first)) {
    for (const auto* inst : batch) {
      if (set_as<geometry::LpBall>(*inst, "constraint_values_node").p != ball->p) {
        throw Error(ErrorCode::kInvalidArgument, "constraint_values_node: lp batches must share p");
      }
    }
    const NodeId c = rows_of(tape, batch, [](const ProblemInstance& i) { return std::get<geometry::LpBall>(i.set).center; });
    const NodeId bound = column(tape, batch, [](const ProblemInstance& i) { return std::get<geometry::LpBall>(i.set).bound; });
    const NodeId norm = sum_axis(tape, ad::pow(tape, ad::abs(tape, sub(tape, y, c)), ball->p), Axis::kCols);
    return sub(tape, norm, bound);
  }
  const auto& qs = std::get<geometry::QuadraticFormSet>(first);
  std::vector<NodeId> cols;
  const std::size_t n_geq = qs.geq.size();
  const std::size_t n_all = n_geq + qs.leq.size();
  for (std::size_t k = 0; k < n_all; ++k) {
    auto form = [&](const ProblemInstance& i) -> const geometry::QuadraticForm& {
      const auto& s = set_as<geometry::QuadraticFormSet>(i, "constraint_values_node");
      if (s.geq.size() != n_geq || s.geq.size() + s.leq.size() != n_all) {
        throw Error(ErrorCode::kDimensionMismatch, "constraint_values_node: quadratic sets differ in size");
      }
      return k < n_geq ? s.geq[k] : s.leq[k - n_geq];
    };
    Matrix level(static_cast<Eigen::Index>(batch.size()), 1);
    for (std::size_t i = 0; i < batch.size(); ++i) level(static_cast<Eigen::Index>(i), 0) = form(*batch[i]).level;
    const NodeId q = quadform(tape, y, gather(batch, [&](const ProblemInstance& i) -> const Matrix& { return form(i).M; }));
    const NodeId lv = tape.constant(std::move(level));
    cols.push_back(k < n_geq ? sub(tape, lv, q) : sub(tape, q, lv));
  }
  return concat(tape, cols, Axis::kCols);
}

ad::NodeId violation_sum_node(ad::Tape& tape, ad::NodeId y, const Batch& batch) {
  return ad::sum_axis(tape, ad::relu(tape, constraint_values_node(tape, y, batch)), ad::Axis::kCols);
}

}  // namespace hop::bench
