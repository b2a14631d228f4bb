#include "pullback/datagen.hpp"
#include "pullback/error.hpp"
#include "pullback/eval.hpp"
#include "pullback/geometry.hpp"
#include "pullback/model_io.hpp"
#include "pullback/rae.hpp"
#include "pullback/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

namespace py = pybind11;
using namespace pullback;

namespace {

// Model plus its manifold, kept together so geometry calls reuse the flow.
class Model {
 public:
  explicit Model(TrainedModel m)
      : model_(std::make_shared<TrainedModel>(std::move(m))),
        manifold_(std::shared_ptr<const Flow>(model_, &model_->flow),
                  std::make_shared<DiagonalQuadratic>(model_->potential)) {}

  const TrainedModel& trained() const { return *model_; }
  const PullbackManifold& manifold() const { return manifold_; }

 private:
  std::shared_ptr<TrainedModel> model_;
  PullbackManifold manifold_;
};

Route route_of(const std::string& s) {
  if (s == "automatic") return Route::automatic;
  if (s == "general") return Route::general;
  if (s == "quadratic") return Route::quadratic;
  fail(ErrorKind::invalid_argument, "unknown route '" + s + "'");
}

TrainConfig make_config(const std::string& dataset, const std::string& variant, std::uint64_t seed,
                        const std::map<std::string, std::string>& overrides) {
  TrainConfig cfg = TrainConfig::defaults_for(dataset);
  if (cfg.dataset.empty()) cfg.dataset = dataset;
  for (const auto& [k, v] : overrides) cfg.apply(k, v);
  cfg.variant = parse_variant(variant);
  cfg.seed = seed;
  return cfg;
}

py::dict stats_dict(const ErrorStats& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["std"] = s.std;
  d["pairs"] = s.pairs;
  d["excluded"] = s.excluded;
  return d;
}

}  // namespace

PYBIND11_MODULE(pullback, m) {
  m.doc() = "Pullback geometry of learned unimodal densities";

  static py::exception<Error> base(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.attr("MODEL_SCHEMA") = kModelSchema;
  m.attr("DATASET_SCHEMA") = kDatasetSchema;
  m.attr("EVAL_SCHEMA") = kEvalSchema;

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("samples", &Dataset::samples)
      .def_readonly("generator", &Dataset::generator)
      .def_readonly("parameters", &Dataset::parameters)
      .def_readonly("seed", &Dataset::seed)
      .def("__len__", &Dataset::size);

  m.def(
      "generate_dataset",
      [](const std::string& name, std::size_t n, std::uint64_t seed, std::size_t intrinsic_dim,
         std::size_t ambient_dim, std::size_t mcmc_steps, double step_size) {
        return generate_dataset(name, n, seed, intrinsic_dim, ambient_dim, LangevinOptions{mcmc_steps, step_size});
      },
      py::arg("name"), py::arg("n"), py::arg("seed") = 0, py::arg("intrinsic_dim") = 0, py::arg("ambient_dim") = 0,
      py::arg("mcmc_steps") = LangevinOptions{}.steps, py::arg("step_size") = LangevinOptions{}.step_size);
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<Model>(m, "Model")
      .def_static(
          "load", [](const std::string& path) { return Model(load_model(path)); }, py::arg("path"))
      .def(
          "save", [](const Model& self, const std::string& path) { save_model(self.trained(), path); },
          py::arg("path"))
      .def_property_readonly("dim", [](const Model& self) { return self.manifold().dim(); })
      .def_property_readonly("variant", [](const Model& self) { return self.trained().variant; })
      .def_property_readonly("dataset", [](const Model& self) { return self.trained().dataset; })
      .def_property_readonly("variances", [](const Model& self) { return self.trained().potential.variances(); })
      .def("forward", [](const Model& self, const RowMatrix& x) { return self.trained().flow.forward_rows(x); })
      .def("inverse", [](const Model& self, const RowMatrix& y) { return self.trained().flow.inverse_rows(y); })
      .def("jacobian", [](const Model& self, const Vector& x) { return self.trained().flow.jacobian(x); })
      .def("logdet", [](const Model& self, const Vector& x) { return self.trained().flow.logdet(x); })
      .def(
          "geodesic",
          [](const Model& self, const Vector& x, const Vector& y, std::size_t steps, const std::string& route) {
            return self.manifold().geodesic_curve(x, y, steps, route_of(route));
          },
          py::arg("x"), py::arg("y"), py::arg("steps") = 100, py::arg("route") = "automatic")
      .def(
          "log_map",
          [](const Model& self, const Vector& x, const Vector& y, const std::string& route) {
            return self.manifold().log_map(x, y, route_of(route));
          },
          py::arg("x"), py::arg("y"), py::arg("route") = "automatic")
      .def(
          "exp_map",
          [](const Model& self, const Vector& x, const Vector& v, const std::string& route) {
            return self.manifold().exp_map(x, v, route_of(route));
          },
          py::arg("x"), py::arg("v"), py::arg("route") = "automatic")
      .def(
          "distance",
          [](const Model& self, const Vector& x, const Vector& y, const std::string& route) {
            return self.manifold().distance(x, y, route_of(route));
          },
          py::arg("x"), py::arg("y"), py::arg("route") = "automatic")
      .def(
          "barycentre",
          [](const Model& self, const RowMatrix& points, const std::string& route) {
            return self.manifold().barycentre(points, route_of(route));
          },
          py::arg("points"), py::arg("route") = "automatic")
      .def(
          "latent_dim", [](const Model& self, double eps) {
            return select_dimension(self.trained().potential.variances(), eps);
          },
          py::arg("epsilon") = 0.01)
      .def(
          "reconstruction_curve",
          [](const Model& self, const RowMatrix& data, const std::string& order, std::uint64_t seed) {
            const TrainedModel& t = self.trained();
            return reconstruction_curve(t.flow, t.potential, data, parse_axis_order(order), seed).mean_error;
          },
          py::arg("data"), py::arg("order") = "decreasing", py::arg("seed") = 0);

  m.def(
      "train",
      [](const RowMatrix& data, const std::string& dataset, const std::string& variant, std::uint64_t seed,
         const std::map<std::string, std::string>& overrides) {
        const TrainConfig cfg = make_config(dataset, variant, seed, overrides);
        std::optional<TrainResult> r;
        {
          py::gil_scoped_release release;
          r = train(data, cfg);
        }
        py::list history;
        for (const EpochRecord& e : r->history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["nll"] = e.nll;
          d["vol"] = e.vol;
          d["iso"] = e.iso;
          d["total"] = e.total;
          d["lr"] = e.lr;
          history.append(d);
        }
        return py::make_tuple(Model(std::move(r->model)), history);
      },
      py::arg("data"), py::arg("dataset") = "", py::arg("variant") = "ours", py::arg("seed") = 0,
      py::arg("overrides") = std::map<std::string, std::string>{},
      "Returns (model, history). `overrides` maps config keys to values, e.g. {'epochs': '10'}.");

  m.def(
      "train_config",
      [](const std::string& dataset, const std::string& variant, std::uint64_t seed,
         const std::map<std::string, std::string>& overrides) {
        return make_config(dataset, variant, seed, overrides).to_map();
      },
      py::arg("dataset") = "", py::arg("variant") = "ours", py::arg("seed") = 0,
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("select_dimension", &select_dimension, py::arg("variances"), py::arg("epsilon"));

  m.def(
      "ground_truth_geodesic",
      [](const std::string& dataset, const Vector& x, const Vector& y, std::size_t steps) {
        return ground_truth_manifold(dataset).geodesic_curve(x, y, steps);
      },
      py::arg("dataset"), py::arg("x"), py::arg("y"), py::arg("steps") = 100);

  m.def(
      "evaluate",
      [](const Model& model, const std::string& dataset, const RowMatrix& test_points, std::size_t pairs,
         std::size_t steps, double sigma_factor, std::uint64_t seed) {
        EvalConfig c;
        c.pairs = pairs;
        c.steps = steps;
        c.sigma_factor = sigma_factor;
        c.seed = seed;
        const EvalCell cell = evaluate_model(model.trained(), dataset, test_points, c);
        py::dict d;
        d["geodesic"] = stats_dict(cell.geodesic);
        d["variation"] = stats_dict(cell.variation);
        return d;
      },
      py::arg("model"), py::arg("dataset"), py::arg("test_points"), py::arg("pairs") = 100, py::arg("steps") = 100,
      py::arg("sigma_factor") = 0.05, py::arg("seed") = 0);
}
