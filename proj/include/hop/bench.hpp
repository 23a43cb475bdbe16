#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hop/learning.hpp"
#include "hop/mapping.hpp"
#include "hop/problem.hpp"

namespace hop::bench {

inline constexpr double kTrainFraction = 0.7;
inline constexpr int kMaxAttempts = 1000;

int train_count(int n);

/// Deterministic per-instance RNG stream derived from (dataset seed, family, index, attempt).
std::uint64_t stream_seed(std::uint64_t seed, Family family, std::uint64_t index, std::uint64_t attempt);

struct GenConfig {
  int n = 200;
  std::uint64_t seed = 0;
  int dim = 20;              // high-dimensional family
  int users = 3;             // MISO
  int antennas = 4;          // MISO
  double beta = 1.0;         // polygon sinusoid frequency
  double highdim_beta = 30.0;
  double sigma2_w = 0.01;     // noise power in W; stored on instances in mW
  double p_max_dbm = 33.0;
  double p_c_dbm = 30.0;
  double pathloss_db = 20.0;  // channel power attenuation applied to h
};

Dataset gen_polygon_dataset(int n, std::uint64_t seed, const GenConfig& cfg = {});
Dataset gen_lp_dataset(int n, std::uint64_t seed, const GenConfig& cfg = {});
Dataset gen_highdim_dataset(int n, int d, std::uint64_t seed, const GenConfig& cfg = {});
Dataset gen_miso_dataset(int n, int users, int antennas, std::uint64_t seed, const GenConfig& cfg = {});
/// Dispatches on the family using cfg.n / cfg.seed.
Dataset generate(Family family, const GenConfig& cfg);

/// Regular octagon normals (cos 2πi/8, sin 2πi/8).
Matrix octagon_normals();
/// Q = GᵀG + I with G standard normal, d x d.
Matrix random_pd(std::mt19937_64& rng, int d);

// MISO pipeline.
double dbm_to_mw(double dbm);
/// P_max - P_c in mW.
double linear_power_budget(double p_max_dbm, double p_c_dbm);
/// H̃ = [Re G, -Im G; Im G, Re G] with G = h hᴴ.
Matrix splice_channel(const Vector& h_re, const Vector& h_im);
/// Fills raw.h_tilde from the channels.
void build_h_tilde(MisoWSR& raw);
/// QoS forms w̄ᵀH̄_k w̄ >= ω_k σ² with H̄_k = blockdiag(f_j H̃_k), then the power cap w̄ᵀw̄ <= P_lin.
geometry::ConstraintSet miso_reformulate(const MisoWSR& raw);
/// Flattened H̃_k followed by α and δ.
Vector miso_features(const MisoWSR& raw);

struct InteriorPointResult {
  Vector y0;
  double margin = 0.0;  // min_k (SINR_k - ω_k) at y0
  int steps = 0;
};

/// Matched beamformers at half the power budget, then projected ascent on
/// min_k (SINR_k - ω_k) over the sphere ‖w̄‖² = P_lin/2. Throws kInfeasible
/// if no point with every margin >= 1e-3 is found within 500 steps.
InteriorPointResult miso_interior_point(const geometry::ConstraintSet& set, const MisoWSR& raw, std::uint64_t seed);

struct OracleResult {
  Vector y;
  double f = 0.0;  // minimised objective
};

struct GridOracleConfig {
  int n_theta = 360;
  int n_r = 64;
  int refine_steps = 200;
  double refine_lr = 1e-2;
};

/// Polar grid search through the exact map plus refinement of the winner by
/// Adam on its raw code. Requires d = 2 and a bounded set.
OracleResult grid_oracle_2d(const ProblemInstance& inst, int n_theta, int n_r, const GridOracleConfig& cfg = {});
/// Batched form over data[begin, end); refinement runs on one tape.
std::vector<OracleResult> grid_oracle_2d(const std::vector<ProblemInstance>& data, int begin, int end,
                                         const GridOracleConfig& cfg = {});

struct MultistartConfig {
  int n_starts = 8;
  int steps = 1000;
  double lr = 0.05;
  std::uint64_t seed = 0;
  mapping::MapConfig map;
};

/// n_starts random raw codes optimised by Adam through the map; the best
/// iterate seen (initial codes included) is returned.
OracleResult polar_multistart_reference(const ProblemInstance& inst, int n_starts, int steps, std::uint64_t seed);
std::vector<OracleResult> polar_multistart_reference(const std::vector<ProblemInstance>& data, int begin, int end,
                                                     const MultistartConfig& cfg);

struct LabelConfig {
  GridOracleConfig grid;
  MultistartConfig multistart;
};

/// Attaches oracle solutions as labels: the grid oracle for 2-D families, the
/// multi-start reference otherwise.
void attach_labels(Dataset& ds, const LabelConfig& cfg = {});
/// Oracle solutions for data[begin, end) with the family's oracle.
std::vector<OracleResult> reference_solutions(const Dataset& ds, int begin, int end, const LabelConfig& cfg = {});

}  // namespace hop::bench
