#include "hop/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hop::io {

namespace {

constexpr const char* kDatasetKind = "hop-dataset";
constexpr const char* kCheckpointKind = "hop-checkpoint";

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json row_json(const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return rows;
}

Vector json_vec(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

RowVector json_row(const json& j) { return json_vec(j).transpose(); }

Matrix json_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw Error(ErrorCode::kIo, "ragged matrix in JSON");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

// Flat row-major weights with an explicit shape.
json flat_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix json_flat(const json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1]) {
    throw Error(ErrorCode::kIo, "weight array does not match its shape");
  }
  return Eigen::Map<const Matrix>(data.data(), shape[0], shape[1]);
}

json forms_json(const std::vector<geometry::QuadraticForm>& forms) {
  json out = json::array();
  for (const auto& f : forms) out.push_back({{"M", mat_json(f.M)}, {"level", f.level}});
  return out;
}

std::vector<geometry::QuadraticForm> json_forms(const json& j) {
  std::vector<geometry::QuadraticForm> out;
  for (const auto& f : j) out.push_back({json_mat(f.at("M")), f.at("level").get<double>()});
  return out;
}

json objective_json(const bench::Objective& obj) {
  return std::visit(
      [](const auto& o) -> json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, bench::SinusoidalQP>) {
          return {{"kind", "sinusoidal_qp"}, {"Q", mat_json(o.Q)}, {"p", vec_json(o.p)}, {"beta", o.beta}};
        } else if constexpr (std::is_same_v<T, bench::QPObjective>) {
          return {{"kind", "qp"}, {"Q", mat_json(o.Q)}, {"p", vec_json(o.p)}};
        } else {
          return {{"kind", "miso_wsr"},
                  {"users", o.users},
                  {"antennas", o.antennas},
                  {"h_re", mat_json(o.h_re)},
                  {"h_im", mat_json(o.h_im)},
                  {"alpha", vec_json(o.alpha)},
                  {"delta", vec_json(o.delta)},
                  {"sigma2_mw", o.sigma2},
                  {"p_max_dbm", o.p_max_dbm},
                  {"p_c_dbm", o.p_c_dbm}};
        }
      },
      obj);
}

bench::Objective json_objective(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "sinusoidal_qp") {
    return bench::SinusoidalQP{json_mat(j.at("Q")), json_vec(j.at("p")), j.at("beta").get<double>()};
  }
  if (kind == "qp") return bench::QPObjective{json_mat(j.at("Q")), json_vec(j.at("p"))};
  if (kind == "miso_wsr") {
    bench::MisoWSR raw;
    raw.users = j.at("users");
    raw.antennas = j.at("antennas");
    raw.h_re = json_mat(j.at("h_re"));
    raw.h_im = json_mat(j.at("h_im"));
    raw.alpha = json_vec(j.at("alpha"));
    raw.delta = json_vec(j.at("delta"));
    raw.sigma2 = j.at("sigma2_mw");
    raw.p_max_dbm = j.at("p_max_dbm");
    raw.p_c_dbm = j.at("p_c_dbm");
    bench::build_h_tilde(raw);
    return raw;
  }
  throw Error(ErrorCode::kIo, "unknown objective kind '" + kind + "'");
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_json(const json& j) { return fnv1a_hex(j.dump()); }

json to_json(const bench::GenConfig& cfg, bench::Family family) {
  json j = {{"family", bench::family_name(family)}, {"n", cfg.n}, {"seed", cfg.seed}};
  switch (family) {
    case bench::Family::kPolygon: j["beta"] = cfg.beta; break;
    case bench::Family::kLp: break;
    case bench::Family::kHighdim:
      j["dim"] = cfg.dim;
      j["beta"] = cfg.highdim_beta;
      break;
    case bench::Family::kMiso:
      j["users"] = cfg.users;
      j["antennas"] = cfg.antennas;
      j["sigma2_w"] = cfg.sigma2_w;
      j["p_max_dbm"] = cfg.p_max_dbm;
      j["p_c_dbm"] = cfg.p_c_dbm;
      j["pathloss_db"] = cfg.pathloss_db;
      j["units"] = {{"power", "mW"}, {"noise", "mW"}, {"beamformer", "sqrt(mW)"}};
      break;
  }
  return j;
}

json to_json(const learning::TrainConfig& cfg, learning::Method method) {
  return {{"method", learning::method_name(method)},
          {"epochs", cfg.epochs},
          {"batch", cfg.batch},
          {"lr", cfg.lr},
          {"lr_final", cfg.lr_final},
          {"weight_decay", cfg.weight_decay},
          {"ray_features", cfg.ray_features},
          {"hidden", cfg.hidden},
          {"seed", cfg.seed},
          {"lambda", cfg.lambda},
          {"epsilon", cfg.map.epsilon},
          {"correct_steps", cfg.correct_steps},
          {"correct_step_size", cfg.correct_step_size}};
}

std::string dataset_config_hash(bench::Family family, const bench::GenConfig& cfg) {
  return hash_json(to_json(cfg, family));
}

json to_json(const geometry::ConstraintSet& set) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, geometry::Interval>) {
          return {{"kind", "interval"}, {"lo", s.lo}, {"hi", s.hi}};
        } else if constexpr (std::is_same_v<T, geometry::HalfspaceIntersection>) {
          return {{"kind", "halfspace"}, {"A", mat_json(s.A)}, {"b", vec_json(s.b)}};
        } else if constexpr (std::is_same_v<T, geometry::LpBall>) {
          return {{"kind", "lp_ball"}, {"p", s.p}, {"bound", s.bound}, {"center", vec_json(s.center)}};
        } else {
          return {{"kind", "quadratic"}, {"geq", forms_json(s.geq)}, {"leq", forms_json(s.leq)}};
        }
      },
      set);
}

geometry::ConstraintSet constraint_set_from_json(const json& j) {
  return guarded("constraint payload", [&]() -> geometry::ConstraintSet {
    const std::string kind = j.at("kind");
    if (kind == "interval") return geometry::make_interval(j.at("lo"), j.at("hi"));
    if (kind == "halfspace") return geometry::make_halfspaces(json_mat(j.at("A")), json_vec(j.at("b")));
    if (kind == "lp_ball") return geometry::make_lp_ball(j.at("p"), j.at("bound"), json_vec(j.at("center")));
    if (kind == "quadratic") return geometry::make_quadratic_set(json_forms(j.at("geq")), json_forms(j.at("leq")));
    throw Error(ErrorCode::kIo, "unknown constraint kind '" + kind + "'");
  });
}

json to_json(const bench::ProblemInstance& inst) {
  json j = {{"family", bench::family_name(inst.family)},
            {"index", inst.index},
            {"seed", inst.seed},
            {"x", vec_json(inst.x)},
            {"objective", objective_json(inst.objective)},
            {"constraints", to_json(inst.set)},
            {"y0", vec_json(inst.y0)}};
  if (inst.label) j["label"] = vec_json(*inst.label);
  return j;
}

bench::ProblemInstance instance_from_json(const json& j) {
  return guarded("instance", [&] {
    bench::ProblemInstance inst;
    inst.family = bench::parse_family(j.at("family"));
    inst.index = j.at("index");
    inst.seed = j.at("seed");
    inst.x = json_vec(j.at("x"));
    inst.objective = json_objective(j.at("objective"));
    inst.set = constraint_set_from_json(j.at("constraints"));
    inst.y0 = json_vec(j.at("y0"));
    if (j.contains("label")) inst.label = json_vec(j.at("label"));
    return inst;
  });
}

std::string dataset_to_string(const bench::Dataset& ds, const json& config) {
  std::string out;
  json header = {{"kind", kDatasetKind},
                 {"family", bench::family_name(ds.family)},
                 {"n", ds.instances.size()},
                 {"n_train", ds.n_train},
                 {"rejected", ds.rejected},
                 {"seed", ds.seed},
                 {"config", config},
                 {"config_hash", ds.config_hash}};
  out += header.dump() + "\n";
  for (const auto& inst : ds.instances) {
    json line = to_json(inst);
    line["config_hash"] = ds.config_hash;
    out += line.dump() + "\n";
  }
  return out;
}

void write_dataset(const std::string& path, const bench::Dataset& ds, const json& config) {
  write_text(path, dataset_to_string(ds, config));
}

LoadedDataset read_dataset(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  LoadedDataset out;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIo, path + ": empty dataset file");
  guarded("dataset header", [&] {
    const json header = json::parse(line);
    if (header.value("kind", "") != kDatasetKind) throw Error(ErrorCode::kIo, path + ": not a dataset file");
    out.dataset.family = bench::parse_family(header.at("family"));
    out.dataset.n_train = header.at("n_train");
    out.dataset.rejected = header.at("rejected");
    out.dataset.seed = header.at("seed");
    out.dataset.config_hash = header.at("config_hash");
    out.config = header.at("config");
    return 0;
  });
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = guarded("dataset line", [&] { return json::parse(line); });
    if (j.value("config_hash", "") != out.dataset.config_hash) {
      throw Error(ErrorCode::kHashMismatch, path + ": instance line carries a different config hash");
    }
    out.dataset.instances.push_back(instance_from_json(j));
  }
  if (out.dataset.instances.empty()) throw Error(ErrorCode::kIo, path + ": dataset has no instances");
  if (out.dataset.n_train > static_cast<int>(out.dataset.instances.size())) {
    throw Error(ErrorCode::kIo, path + ": n_train exceeds the instance count");
  }
  return out;
}

std::string checkpoint_config_hash(learning::Method method, const learning::TrainConfig& cfg,
                                   const std::string& dataset_hash) {
  json j = to_json(cfg, method);
  j["dataset_hash"] = dataset_hash;
  return hash_json(j);
}

json to_json(const Checkpoint& c) {
  json layers = json::array();
  for (std::size_t l = 0; l < 3; ++l) {
    layers.push_back({{"weight", flat_json(c.params.W[l])}, {"bias", flat_json(c.params.b[l])}});
  }
  return {{"kind", kCheckpointKind},
          {"method", learning::method_name(c.method)},
          {"config", to_json(c.cfg, c.method)},
          {"seed", c.cfg.seed},
          {"layers", layers},
          {"input_mean", row_json(c.params.input_mean)},
          {"input_scale", row_json(c.params.input_scale)},
          {"history", c.history},
          {"dataset_hash", c.dataset_hash},
          {"config_hash", c.config_hash}};
}

Checkpoint checkpoint_from_json(const json& j) {
  return guarded("checkpoint", [&] {
    if (j.value("kind", "") != kCheckpointKind) throw Error(ErrorCode::kIo, "not a checkpoint");
    Checkpoint c;
    c.method = learning::parse_method(j.at("method"));
    const json& cfg = j.at("config");
    c.cfg.epochs = cfg.at("epochs");
    c.cfg.batch = cfg.at("batch");
    c.cfg.lr = cfg.at("lr");
    c.cfg.lr_final = cfg.at("lr_final");
    c.cfg.weight_decay = cfg.at("weight_decay");
    c.cfg.ray_features = cfg.at("ray_features");
    c.cfg.hidden = cfg.at("hidden");
    c.cfg.seed = cfg.at("seed");
    c.cfg.lambda = cfg.at("lambda");
    c.cfg.map.epsilon = cfg.at("epsilon");
    c.cfg.correct_steps = cfg.at("correct_steps");
    c.cfg.correct_step_size = cfg.at("correct_step_size");
    const json& layers = j.at("layers");
    if (layers.size() != 3) throw Error(ErrorCode::kIo, "checkpoint must hold three layers");
    for (std::size_t l = 0; l < 3; ++l) {
      c.params.W[l] = json_flat(layers[l].at("weight"));
      c.params.b[l] = json_flat(layers[l].at("bias"));
    }
    for (std::size_t l = 1; l < 3; ++l) {
      if (c.params.W[l].cols() != c.params.W[l - 1].rows()) throw Error(ErrorCode::kIo, "checkpoint layer shapes disagree");
    }
    c.params.ray_features = c.cfg.ray_features;
    c.params.input_mean = json_row(j.at("input_mean"));
    c.params.input_scale = json_row(j.at("input_scale"));
    c.history = j.at("history").get<std::vector<double>>();
    c.dataset_hash = j.at("dataset_hash");
    c.config_hash = j.at("config_hash");
    if (c.config_hash != checkpoint_config_hash(c.method, c.cfg, c.dataset_hash)) {
      throw Error(ErrorCode::kHashMismatch, "checkpoint config hash does not match its contents");
    }
    return c;
  });
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_text(path, to_json(ckpt).dump() + "\n"); }

Checkpoint read_checkpoint(const std::string& path) {
  const std::string text = read_text(path);
  return checkpoint_from_json(guarded("checkpoint", [&] { return json::parse(text); }));
}

json to_json(const learning::MetricsReport& m, bool per_instance) {
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"method", m.method},
            {"n", m.n},
            {"obj_value", num(m.obj_mean)},
            {"feasible_obj_value", num(m.feasible_obj_mean)},
            {"max_cons", m.max_cons},
            {"mean_cons", m.mean_cons},
            {"vio_rate", m.vio_rate},
            {"time_ms", m.time_ms}};
  if (per_instance) {
    json rows = json::array();
    for (const auto& r : m.per_instance) {
      rows.push_back({{"objective", num(r.objective)},
                      {"max_violation", r.max_violation},
                      {"mean_violation", r.mean_violation},
                      {"feasible", r.feasible},
                      {"time_ms", r.time_ms}});
    }
    j["per_instance"] = std::move(rows);
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hop::io
