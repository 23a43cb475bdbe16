#include <chrono>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hop/bench.hpp"
#include "hop/io.hpp"
#include "hop/learning.hpp"
#include "hop/polarlab.hpp"

using namespace hop;
using hop::io::json;

namespace {

struct RunConfig {
  std::string family = "polygon";
  int n = 2000;
  int dim = 20;
  int users = 3;
  int antennas = 4;
  std::uint64_t seed = 0;
  double beta = 1.0;

  int epochs = 50;
  int batch = 64;
  double lr = 5e-3;
  int hidden = 64;
  double epsilon = 1e-3;
  std::string loss = "hop";
  double lambda = 10.0;
  int ray_features = 0;
  double lr_final = 1.0;

  int starts = 8;
  int steps = 1000;
  int jobs = 1;

  std::string data;
  std::string ckpt;
  std::string out;
  std::string split = "test";
  bool labels = false;
  std::string methods = "hop,ssl,sl,ssl-sc,sl-sc,dc3";
  double tolerance = 1e-5;

  // polarlab
  std::string mode = "truncate";
  std::string objective = "shifted_quadratic";
  double momentum = 0.0;
  double alpha = 0.1;
  double r0 = 1.0;
  double theta0 = 0.0;
};

void add_gen_flags(CLI::App* app, RunConfig& rc) {
  app->add_option("--family", rc.family, "polygon, lp, highdim or miso")
      ->check(CLI::IsMember({"polygon", "lp", "highdim", "miso"}));
  app->add_option("--n", rc.n, "number of instances")->check(CLI::PositiveNumber);
  app->add_option("--dim", rc.dim, "solution dimension of the highdim family")->check(CLI::PositiveNumber);
  app->add_option("--users", rc.users, "MISO users U")->check(CLI::PositiveNumber);
  app->add_option("--antennas", rc.antennas, "MISO antennas M")->check(CLI::PositiveNumber);
  app->add_option("--seed", rc.seed, "generation seed");
  app->add_option("--beta", rc.beta, "sinusoidal weight of the polygon objective");
}

void add_train_flags(CLI::App* app, RunConfig& rc) {
  app->add_option("--epochs", rc.epochs)->check(CLI::NonNegativeNumber);
  app->add_option("--batch", rc.batch)->check(CLI::PositiveNumber);
  app->add_option("--lr", rc.lr)->check(CLI::PositiveNumber);
  app->add_option("--hidden", rc.hidden)->check(CLI::PositiveNumber);
  app->add_option("--epsilon", rc.epsilon, "boundary clamp on the angle")->check(CLI::PositiveNumber);
  app->add_option("--lambda", rc.lambda, "penalty weight of the soft-constraint losses")->check(CLI::NonNegativeNumber);
  app->add_option("--ray-features", rc.ray_features, "boundary-distance input features (2-D sets)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--lr-final", rc.lr_final, "cosine-decayed final lr as a fraction of --lr")->check(CLI::Range(1e-12, 1.0));
}

void add_oracle_flags(CLI::App* app, RunConfig& rc) {
  app->add_option("--starts", rc.starts, "multi-start restarts")->check(CLI::PositiveNumber);
  app->add_option("--steps", rc.steps, "Adam steps per start")->check(CLI::NonNegativeNumber);
}

bench::GenConfig gen_config(const RunConfig& rc) {
  bench::GenConfig g;
  g.n = rc.n;
  g.seed = rc.seed;
  g.dim = rc.dim;
  g.users = rc.users;
  g.antennas = rc.antennas;
  g.beta = rc.beta;
  return g;
}

learning::TrainConfig train_config(const RunConfig& rc, std::uint64_t seed) {
  learning::TrainConfig t;
  t.epochs = rc.epochs;
  t.batch = rc.batch;
  t.lr = rc.lr;
  t.hidden = rc.hidden;
  t.seed = seed;
  t.lambda = rc.lambda;
  t.ray_features = rc.ray_features;
  t.lr_final = rc.lr_final;
  t.map.epsilon = rc.epsilon;
  return t;
}

bench::LabelConfig label_config(const RunConfig& rc, std::uint64_t seed) {
  bench::LabelConfig l;
  l.multistart.n_starts = rc.starts;
  l.multistart.steps = rc.steps;
  l.multistart.seed = seed;
  return l;
}

bench::Dataset generate(const RunConfig& rc) {
  const bench::Family f = bench::parse_family(rc.family);
  const bench::GenConfig g = gen_config(rc);
  bench::Dataset ds = bench::generate(f, g);
  ds.config_hash = io::dataset_config_hash(f, g);
  return ds;
}

bool has_labels(const bench::Dataset& ds) {
  for (int i = 0; i < ds.n_train; ++i) {
    if (!ds.instances[static_cast<std::size_t>(i)].label) return false;
  }
  return true;
}

std::pair<int, int> split_range(const bench::Dataset& ds, const std::string& split) {
  const int n = static_cast<int>(ds.instances.size());
  if (split == "test") return {ds.n_train, n};
  if (split == "train") return {0, ds.n_train};
  return {0, n};
}

void emit(const json& j, const std::string& out) {
  if (!out.empty()) io::write_text(out, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
}

json stamp(json j, const std::string& config_hash, std::uint64_t seed, const std::string& family) {
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["family"] = family;
  return j;
}

int cmd_gen(const RunConfig& rc) {
  if (rc.out.empty()) throw Error(ErrorCode::kInvalidArgument, "gen: --out is required");
  bench::Dataset ds = generate(rc);
  if (rc.labels) bench::attach_labels(ds, label_config(rc, rc.seed));
  io::write_dataset(rc.out, ds, io::to_json(gen_config(rc), ds.family));
  std::cout << json{{"path", rc.out},
                    {"family", rc.family},
                    {"n", ds.instances.size()},
                    {"n_train", ds.n_train},
                    {"rejected", ds.rejected},
                    {"seed", rc.seed},
                    {"config_hash", ds.config_hash}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_oracle(const RunConfig& rc) {
  io::LoadedDataset loaded = io::read_dataset(rc.data);
  bench::Dataset& ds = loaded.dataset;
  const auto [begin, end] = split_range(ds, rc.split);
  const auto ref = bench::reference_solutions(ds, begin, end, label_config(rc, ds.seed));
  std::vector<Vector> points;
  for (const auto& r : ref) points.push_back(r.y);
  const auto metrics = learning::evaluate_points(ds.instances, begin, end, points, "oracle");
  json j = stamp(io::to_json(metrics), ds.config_hash, ds.seed, bench::family_name(ds.family));
  j["split"] = rc.split;
  j["starts"] = rc.starts;
  j["steps"] = rc.steps;
  emit(j, rc.out);
  return 0;
}

int cmd_train(const RunConfig& rc) {
  if (rc.out.empty()) throw Error(ErrorCode::kInvalidArgument, "train: --out is required");
  io::LoadedDataset loaded = io::read_dataset(rc.data);
  bench::Dataset& ds = loaded.dataset;
  const learning::Method method = learning::parse_method(rc.loss);
  if (learning::needs_labels(method) && !has_labels(ds)) bench::attach_labels(ds, label_config(rc, ds.seed));

  io::Checkpoint ckpt;
  ckpt.method = method;
  ckpt.cfg = train_config(rc, rc.seed);
  const auto result = learning::train(ds.instances, ds.n_train, method, ckpt.cfg);
  ckpt.params = result.params;
  ckpt.history = result.history;
  ckpt.dataset_hash = ds.config_hash;
  ckpt.config_hash = io::checkpoint_config_hash(method, ckpt.cfg, ckpt.dataset_hash);
  io::write_checkpoint(rc.out, ckpt);
  std::cout << json{{"path", rc.out},
                    {"method", rc.loss},
                    {"epochs", rc.epochs},
                    {"final_loss", result.history.empty() ? json(nullptr) : json(result.history.back())},
                    {"config_hash", ckpt.config_hash},
                    {"dataset_hash", ckpt.dataset_hash},
                    {"seed", rc.seed}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc) {
  const io::LoadedDataset loaded = io::read_dataset(rc.data);
  const bench::Dataset& ds = loaded.dataset;
  const io::Checkpoint ckpt = io::read_checkpoint(rc.ckpt);
  if (ckpt.dataset_hash != ds.config_hash) {
    throw Error(ErrorCode::kHashMismatch, "eval: checkpoint was trained on dataset " + ckpt.dataset_hash +
                                              ", not " + ds.config_hash);
  }
  const auto [begin, end] = split_range(ds, rc.split);
  const auto metrics = learning::evaluate(ds.instances, begin, end, ckpt.params, ckpt.method, ckpt.cfg, rc.jobs);
  json j = stamp(io::to_json(metrics), ckpt.config_hash, ckpt.cfg.seed, bench::family_name(ds.family));
  j["dataset_hash"] = ds.config_hash;
  j["split"] = rc.split;
  emit(j, rc.out);
  return 0;
}

int cmd_gradcheck(const RunConfig& rc) {
  const bench::Dataset ds = generate(rc);
  const learning::Method method = learning::parse_method(rc.loss);
  learning::LossSpec spec{learning::loss_kind(method), 0.0};
  if (spec.kind == learning::LossKind::kSl || spec.kind == learning::LossKind::kSlSc) {
    throw Error(ErrorCode::kInvalidArgument, "gradcheck: the supervised losses need labels; use hop, ssl or ssl-sc");
  }
  if (spec.kind == learning::LossKind::kSslSc) spec.lambda = rc.lambda;
  const int out_dim = bench::solution_dim(ds.instances.front()) + 1;
  const int in_dim = learning::encoded_dim(ds.instances.front(), rc.ray_features);
  double worst = 0.0;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    learning::MlpParams p = learning::mlp_init({in_dim, rc.hidden, rc.hidden, out_dim}, bench::stream_seed(rc.seed, ds.family, i, 1));
    p.ray_features = rc.ray_features;
    learning::fit_standardizer(p, ds.instances, static_cast<int>(ds.instances.size()));
    worst = std::max(worst, learning::pipeline_gradcheck(p, {&ds.instances[i]}, spec));
  }
  const bool pass = worst <= rc.tolerance;
  json j = stamp(json{{"n", ds.instances.size()},
                      {"hidden", rc.hidden},
                      {"loss", rc.loss},
                      {"max_rel_error", worst},
                      {"tolerance", rc.tolerance},
                      {"pass", pass}},
                 ds.config_hash, rc.seed, rc.family);
  emit(j, rc.out);
  return pass ? 0 : 3;
}

int cmd_polarlab(const RunConfig& rc) {
  polarlab::PolarSimConfig cfg;
  cfg.mode = polarlab::parse_mode(rc.mode);
  cfg.objective = polarlab::parse_objective(rc.objective);
  cfg.lr = rc.lr;
  cfg.momentum = rc.momentum;
  cfg.alpha = rc.alpha;
  cfg.steps = rc.steps;
  cfg.r0 = rc.r0;
  cfg.theta0 = rc.theta0;
  const auto traj = polarlab::simulate(cfg);
  if (!rc.out.empty()) polarlab::export_trajectory(traj, rc.out);
  const auto& last = traj.back();
  const json cfg_json = {{"mode", rc.mode}, {"objective", rc.objective}, {"lr", rc.lr}, {"momentum", rc.momentum},
                         {"alpha", rc.alpha}, {"steps", rc.steps},     {"r0", rc.r0}, {"theta0", rc.theta0}};
  std::cout << json{{"config", cfg_json},
                    {"config_hash", io::hash_json(cfg_json)},
                    {"final", {{"r", last.r}, {"theta", last.theta}, {"x", last.x}, {"y", last.y}, {"f", last.f}}},
                    {"rows", traj.size()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_bench(const RunConfig& rc) {
  bench::Dataset ds = generate(rc);
  const auto [begin, end] = split_range(ds, rc.split);
  std::vector<learning::Method> methods;
  for (const auto& name : CLI::detail::split(rc.methods, ',')) methods.push_back(learning::parse_method(name));

  bool labels_needed = false;
  for (auto m : methods) labels_needed = labels_needed || learning::needs_labels(m);
  const auto t0 = std::chrono::steady_clock::now();
  if (labels_needed) bench::attach_labels(ds, label_config(rc, rc.seed));

  json rows = json::array();
  std::vector<Vector> points;
  std::vector<bench::OracleResult> ref;
  if (labels_needed) {
    for (int i = begin; i < end; ++i) points.push_back(*ds.instances[static_cast<std::size_t>(i)].label);
  } else {
    ref = bench::reference_solutions(ds, begin, end, label_config(rc, rc.seed));
    for (const auto& r : ref) points.push_back(r.y);
  }
  rows.push_back(io::to_json(learning::evaluate_points(ds.instances, begin, end, points, "oracle")));
  for (auto m : methods) {
    const learning::TrainConfig tc = train_config(rc, rc.seed);
    const auto result = learning::train(ds.instances, ds.n_train, m, tc);
    json row = io::to_json(learning::evaluate(ds.instances, begin, end, result.params, m, tc, rc.jobs));
    row["config_hash"] = io::checkpoint_config_hash(m, tc, ds.config_hash);
    rows.push_back(std::move(row));
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json j = stamp(json{{"n", ds.instances.size()}, {"n_train", ds.n_train}, {"split", rc.split}, {"rows", rows}},
                 ds.config_hash, rc.seed, rc.family);
  j["train_config"] = io::to_json(train_config(rc, rc.seed), learning::Method::kHop);
  j["wall_s"] = wall;
  emit(j, rc.out);
  return 0;
}

int report_error(const std::string& code, const std::string& message, int status) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HoP: feasible-by-construction L2O benchmarks"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* gen = app.add_subcommand("gen", "generate a dataset (JSON lines)");
  add_gen_flags(gen, rc);
  gen->add_flag("--labels", rc.labels, "attach oracle labels");
  add_oracle_flags(gen, rc);
  gen->add_option("--out", rc.out, "dataset path")->required();

  auto* oracle = app.add_subcommand("oracle", "reference solutions and their metrics");
  oracle->add_option("--data", rc.data)->required()->check(CLI::ExistingFile);
  add_oracle_flags(oracle, rc);
  oracle->add_option("--split", rc.split)->check(CLI::IsMember({"train", "test", "all"}));
  oracle->add_option("--out", rc.out, "metrics JSON path");

  auto* train = app.add_subcommand("train", "train one method and write a checkpoint");
  train->add_option("--data", rc.data)->required()->check(CLI::ExistingFile);
  train->add_option("--loss", rc.loss, "hop, ssl, sl, ssl-sc, sl-sc or dc3")
      ->check(CLI::IsMember({"hop", "ssl", "sl", "ssl-sc", "sl-sc", "dc3"}));
  add_train_flags(train, rc);
  add_oracle_flags(train, rc);
  train->add_option("--seed", rc.seed, "training seed");
  train->add_option("--out", rc.out, "checkpoint path")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--data", rc.data)->required()->check(CLI::ExistingFile);
  eval->add_option("--ckpt", rc.ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--split", rc.split)->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--jobs", rc.jobs)->check(CLI::PositiveNumber);
  eval->add_option("--out", rc.out, "metrics JSON path");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of loss(map(network))");
  add_gen_flags(grad, rc);
  grad->add_option("--hidden", rc.hidden)->check(CLI::PositiveNumber);
  grad->add_option("--loss", rc.loss)->check(CLI::IsMember({"hop", "ssl", "ssl-sc"}));
  grad->add_option("--lambda", rc.lambda)->check(CLI::NonNegativeNumber);
  grad->add_option("--ray-features", rc.ray_features)->check(CLI::NonNegativeNumber);
  grad->add_option("--tolerance", rc.tolerance)->check(CLI::PositiveNumber);
  grad->add_option("--out", rc.out, "report path");

  auto* polar = app.add_subcommand("polarlab", "gradient descent in raw polar coordinates");
  polar->add_option("--mode", rc.mode)->check(CLI::IsMember({"truncate", "dynamic_lr", "reconnect"}));
  polar->add_option("--objective", rc.objective)->check(CLI::IsMember({"shifted_quadratic", "two_well"}));
  polar->add_option("--lr", rc.lr)->check(CLI::PositiveNumber);
  polar->add_option("--momentum", rc.momentum)->check(CLI::Range(0.0, 0.999999));
  polar->add_option("--alpha", rc.alpha)->check(CLI::PositiveNumber);
  polar->add_option("--steps", rc.steps)->check(CLI::PositiveNumber);
  polar->add_option("--r0", rc.r0);
  polar->add_option("--theta0", rc.theta0);
  polar->add_option("--out", rc.out, "trajectory CSV path");

  auto* bench_cmd = app.add_subcommand("bench", "generate, train every method, evaluate");
  add_gen_flags(bench_cmd, rc);
  add_train_flags(bench_cmd, rc);
  add_oracle_flags(bench_cmd, rc);
  bench_cmd->add_option("--methods", rc.methods, "comma separated method list");
  bench_cmd->add_option("--jobs", rc.jobs)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", rc.out, "metrics JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid_config", e.what(), 2);
  }

  if (polar->parsed() && polar->count("--steps") == 0) rc.steps = 200;
  if (polar->parsed() && polar->count("--lr") == 0) rc.lr = 0.3;
  if (grad->parsed()) {
    if (grad->count("--n") == 0) rc.n = 100;
    if (grad->count("--hidden") == 0) rc.hidden = 4;
  }

  try {
    if (gen->parsed()) return cmd_gen(rc);
    if (oracle->parsed()) return cmd_oracle(rc);
    if (train->parsed()) return cmd_train(rc);
    if (eval->parsed()) return cmd_eval(rc);
    if (grad->parsed()) return cmd_gradcheck(rc);
    if (polar->parsed()) return cmd_polarlab(rc);
    if (bench_cmd->parsed()) return cmd_bench(rc);
  } catch (const Error& e) {
    return report_error(error_code_name(e.code()), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
