#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hop/diffcore.hpp"
#include "hop/mapping.hpp"
#include "hop/problem.hpp"

namespace hop::learning {

/// Three affine layers; weights are out x in, biases 1 x out. Inputs are
/// standardised with the stored mean/scale before the first layer.
struct MlpParams {
  std::array<Matrix, 3> W;
  std::array<Matrix, 3> b;
  RowVector input_mean;
  RowVector input_scale;
  int ray_features = 0;  // see encode_input

  int input_dim() const { return static_cast<int>(W[0].cols()); }
  int hidden() const { return static_cast<int>(W[0].rows()); }
  int output_dim() const { return static_cast<int>(W[2].rows()); }
};

/// dims = (input, hidden, hidden, output).
MlpParams mlp_init(const std::array<int, 4>& dims, std::uint64_t seed);

struct MlpNodes {
  std::array<ad::NodeId, 3> W;
  std::array<ad::NodeId, 3> b;
};

/// Registers the weights as tape parameters.
MlpNodes bind(ad::Tape& tape, const MlpParams& params);
/// affine -> relu -> affine -> relu -> affine on a B x input batch.
ad::NodeId mlp_forward(ad::Tape& tape, const MlpParams& params, const MlpNodes& nodes, ad::NodeId x);
/// Inference on a single input; returns the raw output row.
Vector mlp_forward(const MlpParams& params, const Vector& x);

/// Network input of an instance: x, or with k > 0 (2-D sets only) x followed by
/// y0 and atan of the boundary distance along k evenly spaced directions.
Vector encode_input(const bench::ProblemInstance& inst, int ray_features = 0);
int encoded_dim(const bench::ProblemInstance& inst, int ray_features = 0);

/// Stacks encoded instance inputs into a B x n matrix.
Matrix stack_inputs(const std::vector<const bench::ProblemInstance*>& batch, int ray_features = 0);
/// Column mean and standard deviation (floored at 1e-8) of the encoded inputs.
void fit_standardizer(MlpParams& params, const std::vector<bench::ProblemInstance>& data, int count);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied before the moment step
};

struct AdamState {
  AdamConfig cfg;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

AdamState adam_init(const std::vector<const Matrix*>& params, const AdamConfig& cfg);
void adam_step(AdamState& state, const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);

std::vector<Matrix*> parameter_list(MlpParams& params);
std::vector<const Matrix*> parameter_list(const MlpParams& params);

enum class LossKind { kSsl, kSl, kSslSc, kSlSc };

struct LossSpec {
  LossKind kind = LossKind::kSsl;
  double lambda = 0.0;
};

void validate(const LossSpec& spec);

/// Mean over the batch of the per-instance loss: objective (SSL), mean squared
/// error to the label (SL), plus λ·Σ violation for the soft-constraint kinds.
ad::NodeId loss(ad::Tape& tape, const LossSpec& spec, const std::vector<const bench::ProblemInstance*>& batch,
                ad::NodeId y);

struct PostCorrectResult {
  Vector y;
  int steps = 0;
  double violation = 0.0;  // Σ max(0, g_i)² at the returned point
  bool feasible = false;
};

/// y <- y - step·∇Σ max(0, g_i(y))², halving the step whenever the squared
/// violation would increase.
PostCorrectResult post_correct(const Vector& y, const geometry::ConstraintSet& set, int max_steps,
                               double step_size);

enum class Method { kHop, kSsl, kSl, kSslSc, kSlSc, kDc3 };

const char* method_name(Method m);
Method parse_method(const std::string& name);
/// Whether the method's training loss needs oracle labels.
bool needs_labels(Method m);
LossKind loss_kind(Method m);

struct TrainConfig {
  int epochs = 50;
  int batch = 256;
  double lr = 1e-3;
  double lr_final = 1.0;  // final lr as a fraction of lr (cosine decay); 1 keeps it constant
  int hidden = 64;
  double weight_decay = 0.0;
  int ray_features = 0;
  std::uint64_t seed = 0;
  double lambda = 10.0;
  mapping::MapConfig map;
  int correct_steps = 100;
  double correct_step_size = 1e-2;
};

struct TrainResult {
  MlpParams params;
  std::vector<double> history;  // mean training loss per epoch
};

/// Algorithm-1 style loop for HoP and the penalty/supervised baselines on the
/// first `n_train` instances. Deterministic given cfg.seed.
TrainResult train(const std::vector<bench::ProblemInstance>& data, int n_train, Method method,
                  const TrainConfig& cfg);
TrainResult train_hop(const std::vector<bench::ProblemInstance>& data, int n_train, const TrainConfig& cfg);

/// ŷ for one instance from a trained network.
Vector predict(const MlpParams& params, Method method, const bench::ProblemInstance& inst, const TrainConfig& cfg);

struct InstanceMetrics {
  double objective = 0.0;  // reported value (WSR for MISO)
  double max_violation = 0.0;
  double mean_violation = 0.0;
  bool feasible = true;
  double time_ms = 0.0;
};

struct MetricsReport {
  std::string method;
  int n = 0;
  double obj_mean = 0.0;
  double feasible_obj_mean = 0.0;  // over feasible instances; NaN when none
  double max_cons = 0.0;
  double mean_cons = 0.0;
  double vio_rate = 0.0;
  double time_ms = 0.0;  // total inference wall time / n
  std::vector<InstanceMetrics> per_instance;
};

/// Aggregates per-instance metrics into the table columns.
MetricsReport aggregate(std::string method, std::vector<InstanceMetrics> rows);

/// Evaluates instances [begin, end) one at a time. jobs > 1 fans out over threads.
MetricsReport evaluate(const std::vector<bench::ProblemInstance>& data, int begin, int end, const MlpParams& params,
                       Method method, const TrainConfig& cfg, int jobs = 1);

/// Metrics of fixed points (e.g. oracle solutions), one per instance in [begin, end).
MetricsReport evaluate_points(const std::vector<bench::ProblemInstance>& data, int begin, int end,
                              const std::vector<Vector>& points, std::string name);

/// Central differences over every network weight of loss(hop_map(network(x))) on
/// the batch, against the tape gradient. Returns the max relative error
/// |a - n| / max(1, |a|, |n|).
double pipeline_gradcheck(const MlpParams& params, const std::vector<const bench::ProblemInstance*>& batch,
                          const LossSpec& spec, double h = 1e-6);

}  // namespace hop::learning
