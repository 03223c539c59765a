// Copyright 2026 The SVGP-KAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svgpkan/data.hpp"
#include "svgpkan/discovery.hpp"
#include "svgpkan/experiment.hpp"
#include "svgpkan/kernel.hpp"
#include "svgpkan/model.hpp"
#include "svgpkan/parallel.hpp"
#include "svgpkan/svgp_edge.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace svgpkan;

namespace {

// JSON documents cross the boundary as Python objects via the json module.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Dataset make_dataset(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw DimensionMismatch("x and y must have the same number of rows");
  Dataset ds;
  ds.x = x;
  ds.y = y;
  for (Eigen::Index i = 0; i < x.cols(); ++i) ds.feature_names.push_back("x" + std::to_string(i + 1));
  return ds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse variational GP Kolmogorov-Arnold networks";

  py::register_exception<TrainingFailure>(m, "TrainingFailure", PyExc_RuntimeError);
  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefinite", PyExc_ArithmeticError);
  py::register_exception<CsvError>(m, "CsvError", PyExc_ValueError);

  m.def("set_thread_limit", &set_thread_limit, py::arg("threads"));

  // Kernel statistics.
  m.def(
      "psi1",
      [](double mu, double var, const std::vector<double>& z, double lengthscale, double signal_variance) {
        return psi1(mu, var, z, RbfHyper::from_natural(lengthscale, signal_variance));
      },
      py::arg("mu"), py::arg("var"), py::arg("z"), py::arg("lengthscale"), py::arg("signal_variance"));
  m.def(
      "psi2",
      [](double mu, double var, const std::vector<double>& z, double lengthscale, double signal_variance) {
        return psi2(mu, var, z, RbfHyper::from_natural(lengthscale, signal_variance));
      },
      py::arg("mu"), py::arg("var"), py::arg("z"), py::arg("lengthscale"), py::arg("signal_variance"));

  // Data.
  m.def(
      "generate",
      [](const std::string& name, std::size_t n, std::optional<double> noise_sd, std::uint64_t seed,
         std::size_t d) {
        double sd = kFriedmanNoiseSd;
        if (noise_sd) sd = *noise_sd;
        else if (name == "exp1") sd = kExp1NoiseSd;
        else if (name == "exp2") sd = kExp2NoiseSd;
        const Dataset ds = generate(name, n, sd, seed, d);
        return py::make_tuple(ds.x, ds.y, ds.feature_names);
      },
      py::arg("name"), py::arg("n"), py::arg("noise_sd") = py::none(), py::arg("seed") = 0,
      py::arg("d") = 10, "Returns (x, y, feature_names) for exp1, exp2 or friedman1.");

  // Model.
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def(py::init([](const py::dict& d) { return config_from_json(from_python(d)); }))
      .def_readwrite("widths", &ModelConfig::widths)
      .def_readwrite("inducing", &ModelConfig::inducing)
      .def_readwrite("noise_floor", &ModelConfig::noise_floor)
      .def_readwrite("learning_rate", &ModelConfig::learning_rate)
      .def_readwrite("epochs", &ModelConfig::epochs)
      .def_readwrite("batch_size", &ModelConfig::batch_size)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_readwrite("init_lengthscale", &ModelConfig::init_lengthscale)
      .def_readwrite("init_signal_variance", &ModelConfig::init_signal_variance)
      .def_readwrite("init_noise_variance", &ModelConfig::init_noise_variance)
      .def_readwrite("whiten", &ModelConfig::whiten)
      .def("validate", &ModelConfig::validate)
      .def("to_dict", [](const ModelConfig& c) { return to_python(to_json(c)); });

  py::class_<Model>(m, "Model")
      .def(py::init(&Model::initialize), py::arg("config"))
      .def_readonly("config", &Model::config)
      .def_property_readonly("noise_variance", &Model::noise_variance)
      .def_property_readonly("input_dim", &Model::input_dim)
      .def_property_readonly("total_kl", &Model::total_kl)
      .def(
          "predict",
          [](const Model& model, const Matrix& x) {
            const Prediction p = predict(model, x);
            return py::make_tuple(p.mean, p.epistemic_var, p.total_var);
          },
          py::arg("x"), "Returns (mean, epistemic_var, total_var) in raw units.")
      .def(
          "lengthscales",
          [](const Model& model, std::size_t layer) {
            const LayerState& l = model.layers.at(layer);
            Matrix out(static_cast<Eigen::Index>(l.d_out), static_cast<Eigen::Index>(l.d_in));
            for (std::size_t j = 0; j < l.d_out; ++j)
              for (std::size_t i = 0; i < l.d_in; ++i)
                out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                    std::exp(l.log_lengthscale[l.index(i, j)](0, 0));
            return out;
          },
          py::arg("layer") = 0, "Edge lengthscales of one layer, d_out x d_in, standardized units.")
      .def("to_dict", [](const Model& model) { return to_python(to_json(model)); })
      .def_static("from_dict", [](const py::dict& d) { return model_from_json(from_python(d)); })
      .def("save", [](const Model& model, const std::string& path) { save_model(path, model); })
      .def_static("load", [](const std::string& path) { return load_model(path); });

  m.def(
      "train",
      [](Model& model, const Matrix& x, const Vector& y, std::optional<Matrix> x_test,
         std::optional<Vector> y_test) {
        const Dataset tr = make_dataset(x, y);
        std::optional<Dataset> te;
        if (x_test && y_test) te = make_dataset(*x_test, *y_test);
        else if (x_test || y_test) throw std::invalid_argument("give both x_test and y_test or neither");
        TrainReport r;
        {
          py::gil_scoped_release release;
          r = train(model, tr, te ? &*te : nullptr);
        }
        return to_python(to_json(r));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("x_test") = py::none(),
      py::arg("y_test") = py::none(), "Trains in place and returns the training report.");

  // Discovery.
  m.def(
      "permutation_importance",
      [](const Model& model, const Matrix& x, const Vector& y, std::size_t repeats, std::uint64_t seed,
         double tau) {
        ImportanceReport r = permutation_importance(model, x, y, repeats, seed);
        r.tau = tau;
        r.selected = select_features(r.mean_delta, tau);
        r.edges = classify_edges(model, standardized_ranges(model, x));
        return to_python(to_json(r));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("repeats") = kDefaultRepeats,
      py::arg("seed") = 0, py::arg("tau") = kDefaultTau);
  m.def(
      "select_features",
      [](const std::vector<double>& importance, double tau) { return select_features(importance, tau); },
      py::arg("importance"), py::arg("tau") = kDefaultTau);
  m.def(
      "classify_lengthscale",
      [](double lengthscale, double range) { return std::string(to_string(classify_lengthscale(lengthscale, range))); },
      py::arg("lengthscale"), py::arg("range"));

  // Experiments.
  m.def(
      "run_experiment",
      [](const std::string& name, const py::dict& overrides, const std::optional<std::string>& out) {
        const ExperimentOptions o = experiment_options_from_json(from_python(overrides), experiment_preset(name));
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(o);
          if (out) write_experiment(r, *out);
        }
        return to_python(to_json(r));
      },
      py::arg("name"), py::arg("overrides") = py::dict(), py::arg("out") = py::none());
}
