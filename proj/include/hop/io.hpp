#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hop/bench.hpp"
#include "hop/learning.hpp"

namespace hop::io {

using json = nlohmann::json;

/// 64-bit FNV-1a, 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
/// Hash of the compact dump of j (object keys are sorted, so equal configs hash equal).
std::string hash_json(const json& j);

json to_json(const bench::GenConfig& cfg, bench::Family family);
json to_json(const learning::TrainConfig& cfg, learning::Method method);
/// Config hash stamped on generated datasets.
std::string dataset_config_hash(bench::Family family, const bench::GenConfig& cfg);

json to_json(const geometry::ConstraintSet& set);
geometry::ConstraintSet constraint_set_from_json(const json& j);
json to_json(const bench::ProblemInstance& inst);
bench::ProblemInstance instance_from_json(const json& j);

/// JSON-lines: a header object, then one instance per line. Every line carries the config hash.
void write_dataset(const std::string& path, const bench::Dataset& ds, const json& config);
std::string dataset_to_string(const bench::Dataset& ds, const json& config);

struct LoadedDataset {
  bench::Dataset dataset;
  json config;
};
LoadedDataset read_dataset(const std::string& path);

struct Checkpoint {
  learning::Method method = learning::Method::kHop;
  learning::TrainConfig cfg;
  learning::MlpParams params;
  std::vector<double> history;
  std::string dataset_hash;
  std::string config_hash;  // hash of the training config and the dataset hash
};

std::string checkpoint_config_hash(learning::Method method, const learning::TrainConfig& cfg,
                                   const std::string& dataset_hash);
json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const json& j);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Table columns (obj_value, max_cons, mean_cons, vio_rate, time_ms) plus the feasible-only mean.
json to_json(const learning::MetricsReport& m, bool per_instance = false);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace hop::io
