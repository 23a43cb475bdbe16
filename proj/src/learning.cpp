#include "hop/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

namespace hop::learning {

namespace {

using Batch = std::vector<const bench::ProblemInstance*>;

Matrix standardize(const MlpParams& params, Matrix x) {
  if (x.cols() != params.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "mlp_forward: input has " + std::to_string(x.cols()) +
                                                   " features, network expects " + std::to_string(params.input_dim()));
  }
  if (params.input_mean.size() == x.cols()) {
    x.rowwise() -= params.input_mean;
    x.array().rowwise() /= params.input_scale.array();
  }
  return x;
}

int output_dim_for(Method method, int d) { return method == Method::kHop ? d + 1 : d; }

}  // namespace

MlpParams mlp_init(const std::array<int, 4>& dims, std::uint64_t seed) {
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorCode::kInvalidArgument, "mlp_init: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  MlpParams p;
  for (int l = 0; l < 3; ++l) {
    const int in = dims[static_cast<std::size_t>(l)];
    const int out = dims[static_cast<std::size_t>(l + 1)];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    p.W[static_cast<std::size_t>(l)].resize(out, in);
    p.b[static_cast<std::size_t>(l)].resize(1, out);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) p.W[static_cast<std::size_t>(l)](i, j) = u(rng);
    for (int i = 0; i < out; ++i) p.b[static_cast<std::size_t>(l)](0, i) = u(rng);
  }
  p.input_mean = RowVector::Zero(dims[0]);
  p.input_scale = RowVector::Ones(dims[0]);
  return p;
}

MlpNodes bind(ad::Tape& tape, const MlpParams& params) {
  MlpNodes n;
  for (std::size_t l = 0; l < 3; ++l) {
    n.W[l] = tape.parameter(params.W[l]);
    n.b[l] = tape.parameter(params.b[l]);
  }
  return n;
}

ad::NodeId mlp_forward(ad::Tape& tape, const MlpParams& params, const MlpNodes& nodes, ad::NodeId x) {
  using namespace ad;
  NodeId h = tape.constant(standardize(params, tape.value(x)));
  for (std::size_t l = 0; l < 3; ++l) {
    h = add_bias(tape, matmul(tape, h, nodes.W[l], true), nodes.b[l]);
    if (l < 2) h = relu(tape, h);
  }
  return h;
}

Vector mlp_forward(const MlpParams& params, const Vector& x) {
  Matrix h = standardize(params, Matrix(x.transpose()));
  for (std::size_t l = 0; l < 3; ++l) {
    Matrix next = h * params.W[l].transpose();
    next.rowwise() += RowVector(params.b[l]);
    if (l < 2) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h.row(0).transpose();
}

Vector encode_input(const bench::ProblemInstance& inst, int ray_features) {
  if (ray_features < 0) throw Error(ErrorCode::kInvalidArgument, "encode_input: negative ray feature count");
  if (ray_features == 0) return inst.x;
  if (inst.y0.size() != 2) throw Error(ErrorCode::kInvalidArgument, "encode_input: ray features need a 2-D set");
  Vector out(inst.x.size() + 2 + ray_features);
  out << inst.x, inst.y0, Vector::Zero(ray_features);
  for (int k = 0; k < ray_features; ++k) {
    const double a = 2.0 * std::numbers::pi * k / ray_features;
    const Vector v = Eigen::Vector2d(std::cos(a), std::sin(a));
    const auto hit = geometry::boundary_distance(inst.set, inst.y0, v);
    out(inst.x.size() + 2 + k) = hit.finite() ? std::atan(hit.distance) : std::numbers::pi / 2;
  }
  return out;
}

int encoded_dim(const bench::ProblemInstance& inst, int ray_features) {
  return static_cast<int>(inst.x.size()) + (ray_features > 0 ? 2 + ray_features : 0);
}

Matrix stack_inputs(const Batch& batch, int ray_features) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "stack_inputs: empty batch");
  const int n = encoded_dim(*batch.front(), ray_features);
  Matrix x(static_cast<Eigen::Index>(batch.size()), n);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (encoded_dim(*batch[i], ray_features) != n) throw Error(ErrorCode::kDimensionMismatch, "stack_inputs: ragged inputs");
    x.row(static_cast<Eigen::Index>(i)) = encode_input(*batch[i], ray_features).transpose();
  }
  return x;
}

void fit_standardizer(MlpParams& params, const std::vector<bench::ProblemInstance>& data, int count) {
  if (count <= 0 || count > static_cast<int>(data.size())) {
    throw Error(ErrorCode::kInvalidArgument, "fit_standardizer: bad instance count");
  }
  Batch all;
  for (int i = 0; i < count; ++i) all.push_back(&data[static_cast<std::size_t>(i)]);
  const Matrix x = stack_inputs(all, params.ray_features);
  const auto n = x.cols();
  RowVector mean = RowVector::Zero(n);
  for (int i = 0; i < count; ++i) mean += x.row(i);
  mean /= count;
  RowVector var = RowVector::Zero(n);
  for (int i = 0; i < count; ++i) {
    const RowVector c = x.row(i) - mean;
    var += c.cwiseProduct(c);
  }
  var /= count;
  params.input_mean = mean;
  params.input_scale = var.cwiseSqrt().cwiseMax(1e-8);
}

AdamState adam_init(const std::vector<const Matrix*>& params, const AdamConfig& cfg) {
  AdamState s;
  s.cfg = cfg;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(AdamState& state, const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (params.size() != state.m.size() || grads.size() != params.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "adam_step: parameter count mismatch");
  }
  ++state.step;
  const AdamConfig& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "adam_step: gradient shape mismatch");
    }
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g.cwiseProduct(g);
    const auto mhat = state.m[i].array() / bc1;
    const auto vhat = state.v[i].array() / bc2;
    if (c.weight_decay > 0.0) *params[i] *= 1.0 - c.lr * c.weight_decay;
    params[i]->array() -= c.lr * mhat / (vhat.sqrt() + c.eps);
  }
}

std::vector<Matrix*> parameter_list(MlpParams& params) {
  return {&params.W[0], &params.b[0], &params.W[1], &params.b[1], &params.W[2], &params.b[2]};
}

std::vector<const Matrix*> parameter_list(const MlpParams& params) {
  return {&params.W[0], &params.b[0], &params.W[1], &params.b[1], &params.W[2], &params.b[2]};
}

void validate(const LossSpec& spec) {
  if (spec.lambda < 0.0) throw Error(ErrorCode::kInvalidArgument, "loss: lambda must be non-negative");
  if ((spec.kind == LossKind::kSsl || spec.kind == LossKind::kSl) && spec.lambda != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "loss: lambda must be 0 for the SSL and SL kinds");
  }
}

ad::NodeId loss(ad::Tape& tape, const LossSpec& spec, const Batch& batch, ad::NodeId y) {
  validate(spec);
  using namespace ad;
  NodeId per_row{};
  if (spec.kind == LossKind::kSsl || spec.kind == LossKind::kSslSc) {
    per_row = bench::objective_node(tape, y, batch);
  } else {
    Matrix labels(tape.value(y).rows(), tape.value(y).cols());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!batch[i]->label) throw Error(ErrorCode::kInvalidArgument, "loss: SL kinds need a label on every instance");
      if (batch[i]->label->size() != labels.cols()) throw Error(ErrorCode::kDimensionMismatch, "loss: label size");
      labels.row(static_cast<Eigen::Index>(i)) = batch[i]->label->transpose();
    }
    const NodeId diff = sub(tape, y, tape.constant(std::move(labels)));
    per_row = scale(tape, sum_axis(tape, mul(tape, diff, diff), Axis::kCols), 1.0 / static_cast<double>(tape.value(y).cols()));
  }
  if (spec.kind == LossKind::kSslSc || spec.kind == LossKind::kSlSc) {
    per_row = add(tape, per_row, scale(tape, bench::violation_sum_node(tape, y, batch), spec.lambda));
  }
  return mean(tape, per_row);
}

PostCorrectResult post_correct(const Vector& y, const geometry::ConstraintSet& set, int max_steps, double step_size) {
  auto sq_violation = [&](const Vector& p) { return geometry::violation(set, p).squaredNorm(); };
  PostCorrectResult r;
  r.y = y;
  r.violation = sq_violation(y);
  double step = step_size;
  const int m = geometry::num_constraints(set);
  while (r.violation > 0.0 && r.steps < max_steps) {
    ++r.steps;
    const Vector g = geometry::constraint_values(set, r.y);
    Vector grad = Vector::Zero(r.y.size());
    for (int i = 0; i < m; ++i) {
      if (g(i) > 0.0) grad += 2.0 * g(i) * geometry::constraint_gradient(set, i, r.y);
    }
    if (grad.squaredNorm() == 0.0) break;
    const Vector cand = r.y - step * grad;
    const double cv = sq_violation(cand);
    if (cv > r.violation || !std::isfinite(cv)) {
      step *= 0.5;
      continue;
    }
    r.y = cand;
    r.violation = cv;
    step *= 2.0;
  }
  r.feasible = r.violation == 0.0;
  return r;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kHop: return "hop";
    case Method::kSsl: return "ssl";
    case Method::kSl: return "sl";
    case Method::kSslSc: return "ssl-sc";
    case Method::kSlSc: return "sl-sc";
    case Method::kDc3: return "dc3";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kHop, Method::kSsl, Method::kSl, Method::kSslSc, Method::kSlSc, Method::kDc3}) {
    if (name == method_name(m)) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method/loss '" + name + "'");
}

bool needs_labels(Method m) { return m == Method::kSl || m == Method::kSlSc; }

LossKind loss_kind(Method m) {
  switch (m) {
    case Method::kSl: return LossKind::kSl;
    case Method::kSslSc:
    case Method::kDc3: return LossKind::kSslSc;
    case Method::kSlSc: return LossKind::kSlSc;
    default: return LossKind::kSsl;
  }
}

TrainResult train(const std::vector<bench::ProblemInstance>& data, int n_train, Method method, const TrainConfig& cfg) {
  if (n_train <= 0 || n_train > static_cast<int>(data.size())) {
    throw Error(ErrorCode::kInvalidArgument, "train: n_train out of range");
  }
  if (cfg.epochs < 0 || cfg.batch <= 0 || !(cfg.lr > 0.0) || cfg.hidden <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "train: epochs >= 0, batch > 0, lr > 0 and hidden > 0 required");
  }
  if (!(cfg.lr_final > 0.0 && cfg.lr_final <= 1.0) || !(cfg.weight_decay >= 0.0) || cfg.ray_features < 0) {
    throw Error(ErrorCode::kInvalidArgument, "train: lr_final in (0, 1], weight_decay >= 0 and ray_features >= 0 required");
  }
  mapping::validate(cfg.map);
  if (method == Method::kHop) {
    for (int i = 0; i < n_train; ++i) {
      const auto& inst = data[static_cast<std::size_t>(i)];
      if (!(geometry::interior_margin(inst.set, inst.y0) > 0.0)) {
        throw Error(ErrorCode::kNotInterior, "train: instance " + std::to_string(i) + " has an infeasible y0");
      }
    }
  }
  const int d = bench::solution_dim(data.front());
  const int in = encoded_dim(data.front(), cfg.ray_features);
  TrainResult result;
  result.params = mlp_init({in, cfg.hidden, cfg.hidden, output_dim_for(method, d)}, cfg.seed);
  result.params.ray_features = cfg.ray_features;
  fit_standardizer(result.params, data, n_train);
  LossSpec spec{loss_kind(method), 0.0};
  if (spec.kind == LossKind::kSslSc || spec.kind == LossKind::kSlSc) spec.lambda = cfg.lambda;

  AdamState adam = adam_init(parameter_list(std::as_const(result.params)), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  const std::vector<Matrix*> plist = parameter_list(result.params);
  std::vector<int> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    // Cosine schedule from lr down to lr * lr_final.
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    adam.cfg.lr = cfg.lr * (cfg.lr_final + (1.0 - cfg.lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    double total = 0.0;
    for (int start = 0, bi = 0; start < n_train; start += cfg.batch, ++bi) {
      const int stop = std::min(n_train, start + cfg.batch);
      Batch batch;
      for (int k = start; k < stop; ++k) batch.push_back(&data[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
      ad::Tape tape;
      const MlpNodes nodes = bind(tape, result.params);
      const ad::NodeId z = mlp_forward(tape, result.params, nodes, tape.constant(stack_inputs(batch, result.params.ray_features)));
      ad::NodeId objective{};
      try {
        if (method == Method::kHop) {
          std::vector<mapping::RayTarget> rows;
          for (const auto* inst : batch) rows.push_back({&inst->set, &inst->y0});
          const mapping::MapNodes mapped = mapping::hop_map(tape, z, rows, cfg.map);
          objective = loss(tape, spec, batch, mapped.y);
        } else {
          objective = loss(tape, spec, batch, z);
        }
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(bi) + ")");
      }
      const ad::Gradients g = ad::backward(tape, objective);
      std::vector<Matrix> grads;
      for (std::size_t l = 0; l < 3; ++l) {
        grads.push_back(g.wrt(nodes.W[l]));
        grads.push_back(g.wrt(nodes.b[l]));
      }
      adam_step(adam, plist, grads);
      total += tape.scalar(objective) * static_cast<double>(stop - start);
    }
    result.history.push_back(total / n_train);
  }
  return result;
}

TrainResult train_hop(const std::vector<bench::ProblemInstance>& data, int n_train, const TrainConfig& cfg) {
  return train(data, n_train, Method::kHop, cfg);
}

Vector predict(const MlpParams& params, Method method, const bench::ProblemInstance& inst, const TrainConfig& cfg) {
  const Vector z = mlp_forward(params, encode_input(inst, params.ray_features));
  const int d = bench::solution_dim(inst);
  if (z.size() != output_dim_for(method, d)) {
    throw Error(ErrorCode::kDimensionMismatch, "predict: network output size does not match the method");
  }
  if (method == Method::kHop) {
    const mapping::PolarCode code = mapping::reconnect(z.head(d), z(d), cfg.map);
    return mapping::spherical_map(inst.y0, code, inst.set, cfg.map);
  }
  if (method == Method::kDc3) return post_correct(z, inst.set, cfg.correct_steps, cfg.correct_step_size).y;
  return z;
}

MetricsReport aggregate(std::string method, std::vector<InstanceMetrics> rows) {
  MetricsReport r;
  r.method = std::move(method);
  r.n = static_cast<int>(rows.size());
  if (rows.empty()) return r;
  double feasible_sum = 0.0;
  int feasible = 0;
  for (const InstanceMetrics& m : rows) {
    r.obj_mean += m.objective;
    r.max_cons = std::max(r.max_cons, m.max_violation);
    r.mean_cons += m.mean_violation;
    r.time_ms += m.time_ms;
    if (m.feasible) {
      feasible_sum += m.objective;
      ++feasible;
    }
  }
  const double n = static_cast<double>(rows.size());
  r.obj_mean /= n;
  r.mean_cons /= n;
  r.time_ms /= n;
  r.vio_rate = 1.0 - feasible / n;
  r.feasible_obj_mean = feasible > 0 ? feasible_sum / feasible : std::numeric_limits<double>::quiet_NaN();
  r.per_instance = std::move(rows);
  return r;
}

namespace {

InstanceMetrics score(const bench::ProblemInstance& inst, const Vector& y, double time_ms) {
  InstanceMetrics m;
  const Vector v = geometry::violation(inst.set, y);
  m.objective = bench::reported_value(inst, y);
  m.max_violation = v.size() ? v.maxCoeff() : 0.0;
  m.mean_violation = v.size() ? v.mean() : 0.0;
  m.feasible = m.max_violation == 0.0;
  m.time_ms = time_ms;
  return m;
}

}  // namespace

MetricsReport evaluate(const std::vector<bench::ProblemInstance>& data, int begin, int end, const MlpParams& params,
                       Method method, const TrainConfig& cfg, int jobs) {
  if (begin < 0 || end > static_cast<int>(data.size()) || begin > end) {
    throw Error(ErrorCode::kInvalidArgument, "evaluate: range out of bounds");
  }
  std::vector<InstanceMetrics> rows(static_cast<std::size_t>(end - begin));
  auto work = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const auto& inst = data[static_cast<std::size_t>(i)];
      const auto t0 = std::chrono::steady_clock::now();
      const Vector y = predict(params, method, inst, cfg);
      const auto t1 = std::chrono::steady_clock::now();
      rows[static_cast<std::size_t>(i - begin)] =
          score(inst, y, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  };
  jobs = std::max(1, std::min(jobs, end - begin));
  if (jobs == 1) {
    work(begin, end);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    const int chunk = (end - begin + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const int lo = begin + j * chunk;
      const int hi = std::min(end, lo + chunk);
      pool.emplace_back([&, lo, hi, j] {
        try {
          work(lo, hi);
        } catch (...) {
          errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return aggregate(method_name(method), std::move(rows));
}

MetricsReport evaluate_points(const std::vector<bench::ProblemInstance>& data, int begin, int end,
                              const std::vector<Vector>& points, std::string name) {
  if (static_cast<int>(points.size()) != end - begin) {
    throw Error(ErrorCode::kDimensionMismatch, "evaluate_points: one point per instance required");
  }
  std::vector<InstanceMetrics> rows;
  for (int i = begin; i < end; ++i) {
    rows.push_back(score(data[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(i - begin)], 0.0));
  }
  return aggregate(std::move(name), std::move(rows));
}

namespace {

double pipeline_value(const MlpParams& params, const std::vector<const bench::ProblemInstance*>& batch,
                      const LossSpec& spec, std::vector<Matrix>* grads) {
  ad::Tape tape;
  const MlpNodes nodes = bind(tape, params);
  const ad::NodeId z = mlp_forward(tape, params, nodes, tape.constant(stack_inputs(batch, params.ray_features)));
  std::vector<mapping::RayTarget> rows;
  for (const auto* inst : batch) rows.push_back({&inst->set, &inst->y0});
  const ad::NodeId l = loss(tape, spec, batch, mapping::hop_map(tape, z, rows).y);
  if (grads) {
    const ad::Gradients g = ad::backward(tape, l);
    for (std::size_t k = 0; k < 3; ++k) {
      grads->push_back(g.wrt(nodes.W[k]));
      grads->push_back(g.wrt(nodes.b[k]));
    }
  }
  return tape.scalar(l);
}

}  // namespace

double pipeline_gradcheck(const MlpParams& params, const std::vector<const bench::ProblemInstance*>& batch,
                          const LossSpec& spec, double h) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "pipeline_gradcheck: empty batch");
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "pipeline_gradcheck: h must be positive");
  validate(spec);
  std::vector<Matrix> analytic;
  pipeline_value(params, batch, spec, &analytic);
  MlpParams probe = params;
  std::vector<Matrix*> plist = parameter_list(probe);
  double worst = 0.0;
  for (std::size_t k = 0; k < plist.size(); ++k) {
    for (Eigen::Index e = 0; e < plist[k]->size(); ++e) {
      double& w = plist[k]->data()[e];
      const double saved = w;
      w = saved + h;
      const double up = pipeline_value(probe, batch, spec, nullptr);
      w = saved - h;
      const double dn = pipeline_value(probe, batch, spec, nullptr);
      w = saved;
      const double num = (up - dn) / (2 * h);
      const double a = analytic[k].data()[e];
      worst = std::max(worst, std::abs(a - num) / std::max({1.0, std::abs(a), std::abs(num)}));
    }
  }
  return worst;
}

}  // namespace hop::learning
