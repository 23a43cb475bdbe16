#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "hop/io.hpp"

using namespace hop;
using namespace hop::bench;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hop_test_io_" + name)).string();
}

Dataset stamped(Family f, const GenConfig& cfg) {
  Dataset ds = generate(f, cfg);
  ds.config_hash = io::dataset_config_hash(f, cfg);
  return ds;
}

void expect_same(const ProblemInstance& a, const ProblemInstance& b) {
  CHECK(a.family == b.family);
  CHECK(a.index == b.index);
  CHECK(a.seed == b.seed);
  CHECK(a.x == b.x);
  CHECK(a.y0 == b.y0);
  CHECK(a.label.has_value() == b.label.has_value());
  if (a.label && b.label) CHECK(*a.label == *b.label);
  // same constraint values and objective at a handful of points
  for (int k = 0; k < 5; ++k) {
    const Vector y = a.y0 + 0.1 * k * Vector::Ones(a.y0.size());
    CHECK(geometry::constraint_values(a.set, y) == geometry::constraint_values(b.set, y));
    if (a.family == Family::kMiso) {
      const Vector w = Vector::Constant(solution_dim(a), 0.3 * k);
      CHECK(objective_value(a, w) == objective_value(b, w));
    } else {
      CHECK(objective_value(a, y) == objective_value(b, y));
    }
  }
}

}  // namespace

TEST_CASE("fnv1a known vectors") {
  CHECK(io::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(io::fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(io::fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("config hash depends on every generation knob") {
  GenConfig a;
  a.n = 50;
  a.seed = 3;
  GenConfig b = a;
  CHECK(io::dataset_config_hash(Family::kPolygon, a) == io::dataset_config_hash(Family::kPolygon, b));
  b.seed = 4;
  CHECK(io::dataset_config_hash(Family::kPolygon, a) != io::dataset_config_hash(Family::kPolygon, b));
  b = a;
  b.users = 2;
  CHECK(io::dataset_config_hash(Family::kMiso, a) != io::dataset_config_hash(Family::kMiso, b));
  CHECK(io::dataset_config_hash(Family::kLp, a) != io::dataset_config_hash(Family::kPolygon, a));
}

TEST_CASE("dataset round trip for every family") {
  for (Family f : {Family::kPolygon, Family::kLp, Family::kHighdim, Family::kMiso}) {
    const std::string fam = family_name(f);
    CAPTURE(fam);
    GenConfig cfg;
    cfg.n = 12;
    cfg.seed = 21;
    cfg.dim = 6;
    Dataset ds = stamped(f, cfg);
    if (f == Family::kLp) ds.instances[0].label = Vector::Constant(2, 0.25);
    const std::string path = tmp_path(fam + ".jsonl");
    io::write_dataset(path, ds, io::to_json(cfg, f));
    const io::LoadedDataset back = io::read_dataset(path);
    CHECK(back.dataset.family == f);
    CHECK(back.dataset.n_train == ds.n_train);
    CHECK(back.dataset.rejected == ds.rejected);
    CHECK(back.dataset.config_hash == ds.config_hash);
    REQUIRE(back.dataset.instances.size() == ds.instances.size());
    for (std::size_t i = 0; i < ds.instances.size(); ++i) expect_same(ds.instances[i], back.dataset.instances[i]);
    // re-serialising the loaded dataset reproduces the file byte for byte
    CHECK(io::dataset_to_string(back.dataset, back.config) == io::read_text(path));
    std::remove(path.c_str());
  }
}

TEST_CASE("same seed gives identical dataset bytes") {
  GenConfig cfg;
  cfg.n = 200;
  cfg.seed = 7;
  const auto cfg_json = io::to_json(cfg, Family::kPolygon);
  const std::string a = io::dataset_to_string(stamped(Family::kPolygon, cfg), cfg_json);
  const std::string b = io::dataset_to_string(stamped(Family::kPolygon, cfg), cfg_json);
  CHECK(a == b);
  cfg.seed = 8;
  CHECK(a != io::dataset_to_string(stamped(Family::kPolygon, cfg), io::to_json(cfg, Family::kPolygon)));
}

TEST_CASE("tampered dataset lines are refused") {
  GenConfig cfg;
  cfg.n = 4;
  const Dataset ds = stamped(Family::kLp, cfg);
  std::string text = io::dataset_to_string(ds, io::to_json(cfg, Family::kLp));
  const auto pos = text.rfind(ds.config_hash);
  text.replace(pos, ds.config_hash.size(), std::string(ds.config_hash.size(), '0'));
  const std::string path = tmp_path("tampered.jsonl");
  io::write_text(path, text);
  try {
    io::read_dataset(path);
    FAIL("expected a hash mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kHashMismatch);
  }
  io::write_text(path, "{\"kind\":\"something-else\"}\n");
  CHECK_THROWS_AS(io::read_dataset(path), Error);
  io::write_text(path, "not json\n");
  try {
    io::read_dataset(path);
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(io::read_dataset(tmp_path("missing.jsonl")), Error);
}

TEST_CASE("checkpoint round trip is exact") {
  io::Checkpoint c;
  c.method = learning::Method::kSslSc;
  c.cfg.hidden = 8;
  c.cfg.lr = 3e-3;
  c.cfg.seed = 99;
  c.cfg.ray_features = 3;
  c.params = learning::mlp_init({5, 8, 8, 3}, 4);
  c.params.ray_features = 3;
  c.params.input_mean = RowVector::LinSpaced(5, -1.0, 1.0);
  c.params.input_scale = RowVector::Constant(5, 0.7);
  c.history = {1.5, 1.25, 1.0 / 3.0};
  c.dataset_hash = "0123456789abcdef";
  c.config_hash = io::checkpoint_config_hash(c.method, c.cfg, c.dataset_hash);

  const std::string path = tmp_path("ckpt.json");
  io::write_checkpoint(path, c);
  const io::Checkpoint back = io::read_checkpoint(path);
  CHECK(back.method == c.method);
  CHECK(back.cfg.hidden == 8);
  CHECK(back.cfg.lr == c.cfg.lr);
  CHECK(back.cfg.seed == 99);
  CHECK(back.params.ray_features == 3);
  CHECK(back.history == c.history);
  CHECK(back.dataset_hash == c.dataset_hash);
  for (int l = 0; l < 3; ++l) {
    CHECK(back.params.W[l] == c.params.W[l]);
    CHECK(back.params.b[l] == c.params.b[l]);
  }
  CHECK(back.params.input_mean == c.params.input_mean);
  CHECK(back.params.input_scale == c.params.input_scale);
  CHECK(io::to_json(back).dump() == io::to_json(c).dump());

  // editing the training config without re-stamping is detected
  auto j = io::to_json(c);
  j["config"]["lr"] = 1.0;
  try {
    io::checkpoint_from_json(j);
    FAIL("expected a hash mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kHashMismatch);
  }
  std::remove(path.c_str());
}

TEST_CASE("metrics json has the table columns") {
  learning::MetricsReport m = learning::aggregate("hop", {{-1.0, 0.0, 0.0, true, 0.5}, {-3.0, 0.0, 0.0, true, 1.5}});
  const auto j = io::to_json(m, true);
  CHECK(j.at("method") == "hop");
  CHECK(j.at("n") == 2);
  CHECK(j.at("obj_value").get<double>() == doctest::Approx(-2.0));
  CHECK(j.at("vio_rate").get<double>() == 0.0);
  CHECK(j.at("max_cons").get<double>() == 0.0);
  CHECK(j.at("per_instance").size() == 2);
  CHECK(j.contains("time_ms"));
  learning::MetricsReport none = learning::aggregate("ssl", {{-1.0, 0.5, 0.5, false, 0.1}});
  CHECK(io::to_json(none).at("feasible_obj_value").is_null());
}
