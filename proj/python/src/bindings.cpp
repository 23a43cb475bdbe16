#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hop/bench.hpp"
#include "hop/io.hpp"
#include "hop/learning.hpp"
#include "hop/mapping.hpp"
#include "hop/polarlab.hpp"

namespace py = pybind11;
using namespace hop;

namespace {

// A dataset plus the generation config its hash was computed from.
struct PyDataset : bench::Dataset {
  std::string config_json = "{}";
};

struct Model {
  learning::Method method;
  learning::TrainConfig cfg;
  learning::TrainResult result;
  std::string dataset_hash;
};

PyDataset make_dataset(const std::string& family, int n, std::uint64_t seed, int dim, int users, int antennas,
                       double beta) {
  const bench::Family f = bench::parse_family(family);
  bench::GenConfig g;
  g.n = n;
  g.seed = seed;
  g.dim = dim;
  g.users = users;
  g.antennas = antennas;
  g.beta = beta;
  PyDataset ds;
  static_cast<bench::Dataset&>(ds) = bench::generate(f, g);
  ds.config_hash = io::dataset_config_hash(f, g);
  ds.config_json = io::to_json(g, f).dump();
  return ds;
}

std::pair<int, int> split_range(const bench::Dataset& ds, const std::string& split) {
  const int n = static_cast<int>(ds.instances.size());
  if (split == "test") return {ds.n_train, n};
  if (split == "train") return {0, ds.n_train};
  if (split == "all") return {0, n};
  throw Error(ErrorCode::kInvalidArgument, "split must be train, test or all");
}

py::dict metrics_dict(const learning::MetricsReport& m) {
  return py::module_::import("json").attr("loads")(io::to_json(m).dump());
}

py::list oracle_list(const std::vector<bench::OracleResult>& r) {
  py::list out;
  for (const auto& o : r) out.append(py::make_tuple(o.y, o.f));
  return out;
}

}  // namespace

PYBIND11_MODULE(_hop, m) {
  m.doc() = "Feasible-by-construction mapping, benchmarks and baselines";

  static py::handle hop_error = py::exception<Error>(m, "HopError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(error_code_name(e.code())) + ": " + e.what();
      PyErr_SetString(hop_error.ptr(), msg.c_str());
    }
  });

  py::class_<bench::ProblemInstance>(m, "Instance")
      .def_property_readonly("family", [](const bench::ProblemInstance& i) { return bench::family_name(i.family); })
      .def_readonly("x", &bench::ProblemInstance::x)
      .def_readonly("y0", &bench::ProblemInstance::y0)
      .def_readonly("label", &bench::ProblemInstance::label)
      .def_readonly("index", &bench::ProblemInstance::index)
      .def_property_readonly("dim", [](const bench::ProblemInstance& i) { return bench::solution_dim(i); })
      .def("objective", [](const bench::ProblemInstance& i, const Vector& y) { return bench::objective_value(i, y); },
           py::arg("y"), "minimised objective (negative WSR for MISO)")
      .def("reported", [](const bench::ProblemInstance& i, const Vector& y) { return bench::reported_value(i, y); },
           py::arg("y"))
      .def("constraint_values", [](const bench::ProblemInstance& i, const Vector& y) {
        return geometry::constraint_values(i.set, y);
      })
      .def("violation", [](const bench::ProblemInstance& i, const Vector& y) { return geometry::violation(i.set, y); })
      .def("contains", [](const bench::ProblemInstance& i, const Vector& y, double tol) {
        return geometry::contains(i.set, y, tol);
      }, py::arg("y"), py::arg("tol") = 0.0)
      .def("boundary_distance", [](const bench::ProblemInstance& i, const Vector& v) {
        const auto hit = geometry::boundary_distance(i.set, i.y0, v);
        return hit.distance;
      }, py::arg("v"), "distance from y0 along unit v to the boundary (inf when unbounded)")
      .def("map", [](const bench::ProblemInstance& i, const Vector& v, double zbar, double epsilon) {
        mapping::MapConfig cfg;
        cfg.epsilon = epsilon;
        return mapping::spherical_map(i.y0, mapping::PolarCode{v, zbar}, i.set, cfg);
      }, py::arg("v"), py::arg("zbar"), py::arg("epsilon") = 1e-3)
      .def("inverse_map", [](const bench::ProblemInstance& i, const Vector& y, double epsilon) {
        mapping::MapConfig cfg;
        cfg.epsilon = epsilon;
        const auto c = mapping::inverse_spherical(i.y0, y, i.set, cfg);
        return py::make_tuple(c.v_theta, c.zbar_r);
      }, py::arg("y"), py::arg("epsilon") = 1e-3);

  py::class_<PyDataset>(m, "Dataset")
      .def_property_readonly("family", [](const PyDataset& d) { return bench::family_name(d.family); })
      .def_readonly("seed", &bench::Dataset::seed)
      .def_readonly("n_train", &bench::Dataset::n_train)
      .def_readonly("rejected", &bench::Dataset::rejected)
      .def_readonly("config_hash", &bench::Dataset::config_hash)
      .def("__len__", [](const PyDataset& d) { return d.instances.size(); })
      .def("__getitem__", [](const PyDataset& d, py::ssize_t i) {
        const auto n = static_cast<py::ssize_t>(d.instances.size());
        if (i < 0) i += n;
        if (i < 0 || i >= n) throw py::index_error();
        return d.instances[static_cast<std::size_t>(i)];
      })
      .def("attach_labels", [](PyDataset& d) { bench::attach_labels(d); })
      .def("reference", [](const PyDataset& d, const std::string& split) {
        const auto [b, e] = split_range(d, split);
        return oracle_list(bench::reference_solutions(d, b, e));
      }, py::arg("split") = "test", "oracle (y, f) pairs: grid search in 2-D, multi-start otherwise")
      .def("save", [](const PyDataset& d, const std::string& path) {
        io::write_dataset(path, d, io::json::parse(d.config_json));
      });

  m.def("generate", &make_dataset, py::arg("family"), py::arg("n"), py::arg("seed") = 0, py::arg("dim") = 20,
        py::arg("users") = 3, py::arg("antennas") = 4, py::arg("beta") = 1.0);
  m.def("load_dataset", [](const std::string& path) {
    io::LoadedDataset loaded = io::read_dataset(path);
    PyDataset ds;
    static_cast<bench::Dataset&>(ds) = std::move(loaded.dataset);
    ds.config_json = loaded.config.dump();
    return ds;
  });

  py::class_<Model>(m, "Model")
      .def_property_readonly("method", [](const Model& md) { return learning::method_name(md.method); })
      .def_property_readonly("history", [](const Model& md) { return md.result.history; })
      .def("predict", [](const Model& md, const bench::ProblemInstance& inst) {
        return learning::predict(md.result.params, md.method, inst, md.cfg);
      })
      .def("evaluate", [](const Model& md, const PyDataset& d, const std::string& split, int jobs) {
        const auto [b, e] = split_range(d, split);
        return metrics_dict(learning::evaluate(d.instances, b, e, md.result.params, md.method, md.cfg, jobs));
      }, py::arg("dataset"), py::arg("split") = "test", py::arg("jobs") = 1)
      .def("save", [](const Model& md, const std::string& path) {
        io::Checkpoint c;
        c.method = md.method;
        c.cfg = md.cfg;
        c.params = md.result.params;
        c.history = md.result.history;
        c.dataset_hash = md.dataset_hash;
        c.config_hash = io::checkpoint_config_hash(c.method, c.cfg, c.dataset_hash);
        io::write_checkpoint(path, c);
      });

  m.def("train", [](PyDataset& d, const std::string& method, int epochs, int batch, double lr, int hidden,
                    std::uint64_t seed, double lam, double epsilon, int ray_features, double lr_final) {
    Model md;
    md.method = learning::parse_method(method);
    md.cfg.epochs = epochs;
    md.cfg.batch = batch;
    md.cfg.lr = lr;
    md.cfg.hidden = hidden;
    md.cfg.seed = seed;
    md.cfg.lambda = lam;
    md.cfg.map.epsilon = epsilon;
    md.cfg.ray_features = ray_features;
    md.cfg.lr_final = lr_final;
    if (learning::needs_labels(md.method)) {
      bool have = true;
      for (int i = 0; i < d.n_train; ++i) have = have && d.instances[static_cast<std::size_t>(i)].label.has_value();
      if (!have) bench::attach_labels(d);
    }
    py::gil_scoped_release release;
    md.result = learning::train(d.instances, d.n_train, md.method, md.cfg);
    md.dataset_hash = d.config_hash;
    return md;
  }, py::arg("dataset"), py::arg("method") = "hop", py::arg("epochs") = 50, py::arg("batch") = 64,
     py::arg("lr") = 5e-3, py::arg("hidden") = 64, py::arg("seed") = 0, py::arg("lam") = 10.0,
     py::arg("epsilon") = 1e-3, py::arg("ray_features") = 0, py::arg("lr_final") = 1.0);

  m.def("gradcheck", [](const PyDataset& d, int index, int hidden, std::uint64_t seed) {
    const auto& inst = d.instances.at(static_cast<std::size_t>(index));
    learning::MlpParams p = learning::mlp_init(
        {static_cast<int>(inst.x.size()), hidden, hidden, bench::solution_dim(inst) + 1}, seed);
    learning::fit_standardizer(p, d.instances, static_cast<int>(d.instances.size()));
    return learning::pipeline_gradcheck(p, {&inst}, learning::LossSpec{});
  }, py::arg("dataset"), py::arg("index") = 0, py::arg("hidden") = 4, py::arg("seed") = 0,
     "max relative error of the tape gradient of loss(map(network)) against central differences");

  m.def("jacobian_det", &mapping::jacobian_det_analytic, py::arg("d"), py::arg("psi"));
  m.def("jacobian_det_numeric", [](const Vector& v, double psi) { return mapping::jacobian_det_numeric(v, psi); },
        py::arg("v"), py::arg("psi"));

  m.def("polarlab", [](const std::string& mode, double lr, double momentum, double alpha, int steps, double r0,
                       double theta0, const std::string& objective) {
    polarlab::PolarSimConfig cfg;
    cfg.mode = polarlab::parse_mode(mode);
    cfg.objective = polarlab::parse_objective(objective);
    cfg.lr = lr;
    cfg.momentum = momentum;
    cfg.alpha = alpha;
    cfg.steps = steps;
    cfg.r0 = r0;
    cfg.theta0 = theta0;
    const auto traj = polarlab::simulate(cfg);
    Matrix out(static_cast<Eigen::Index>(traj.size()), 6);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto& p = traj[i];
      out.row(static_cast<Eigen::Index>(i)) << p.step, p.r, p.theta, p.x, p.y, p.f;
    }
    return out;
  }, py::arg("mode") = "truncate", py::arg("lr") = 0.3, py::arg("momentum") = 0.0, py::arg("alpha") = 0.1,
     py::arg("steps") = 200, py::arg("r0") = 1.0, py::arg("theta0") = 0.0, py::arg("objective") = "shifted_quadratic",
     "trajectory rows (step, r, theta, x, y, f)");
}
