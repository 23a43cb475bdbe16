#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hop/diffcore.hpp"
#include "hop/geometry.hpp"

namespace hop::bench {

/// ½ yᵀQy + pᵀ sin(β y).
struct SinusoidalQP {
  Matrix Q;
  Vector p;
  double beta = 1.0;
};

/// ½ yᵀQy + pᵀy.
struct QPObjective {
  Matrix Q;
  Vector p;
};

/// Weighted sum rate of a multi-user MISO downlink. The decision vector is
/// w̄ = [w̃_1; ...; w̃_U] with w̃_j = [Re w_j; Im w_j].
struct MisoWSR {
  int users = 0;
  int antennas = 0;
  Matrix h_re;  // U x M
  Matrix h_im;  // U x M
  Vector alpha;
  Vector delta;
  double sigma2 = 0.01;
  double p_max_dbm = 33.0;
  double p_c_dbm = 30.0;
  std::vector<Matrix> h_tilde;  // per user, 2M x 2M
};

using Objective = std::variant<SinusoidalQP, QPObjective, MisoWSR>;

enum class Family { kPolygon, kLp, kHighdim, kMiso };

const char* family_name(Family f);
Family parse_family(const std::string& name);

struct ProblemInstance {
  Family family = Family::kPolygon;
  Vector x;
  Objective objective;
  geometry::ConstraintSet set;
  Vector y0;
  std::optional<Vector> label;
  std::uint64_t seed = 0;
  int index = 0;
};

struct Dataset {
  Family family = Family::kPolygon;
  std::uint64_t seed = 0;
  std::vector<ProblemInstance> instances;
  int n_train = 0;  // the first n_train instances form the training split
  int rejected = 0; // resampled instances during generation
  std::string config_hash;
};

int solution_dim(const ProblemInstance& inst);

double sinusoidal_qp(const Matrix& Q, const Vector& p, double beta, const Vector& y);
double qp_objective(const Matrix& Q, const Vector& p, const Vector& y);

struct SinrReport {
  Vector sinr;
  double wsr = 0.0;
};

/// SINR_k = w̃_kᵀH̃_k w̃_k / (Σ_{j≠k} w̃_jᵀH̃_k w̃_j + σ²), WSR = Σ α_k log₂(1 + SINR_k).
SinrReport sinr_and_wsr(const MisoWSR& raw, const Vector& w);

/// Value minimised during training (the WSR enters negated).
double objective_value(const ProblemInstance& inst, const Vector& y);
/// Value reported in metrics: the objective itself for the synthetic families, WSR for MISO.
double reported_value(const ProblemInstance& inst, const Vector& y);
/// Whether larger reported values are better.
bool reported_higher_is_better(Family f);

/// Row-wise objective of a batch Y (B x d) on a tape, B x 1. Rows may come
/// from different instances of one family.
ad::NodeId objective_node(ad::Tape& tape, ad::NodeId y, const std::vector<const ProblemInstance*>& batch);

/// Row-wise constraint values g(y) (g <= 0 feasible), B x m. Halfspace
/// batches must share A; every instance of a batch must share the family.
ad::NodeId constraint_values_node(ad::Tape& tape, ad::NodeId y,
                                  const std::vector<const ProblemInstance*>& batch);

/// Σ_i max(0, g_i(y)) per row, B x 1.
ad::NodeId violation_sum_node(ad::Tape& tape, ad::NodeId y, const std::vector<const ProblemInstance*>& batch);

}  // namespace hop::bench
