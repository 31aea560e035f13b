#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "relparcel/checkpoint.hpp"
#include "relparcel/cli.hpp"
#include "relparcel/data.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/gradcheck.hpp"
#include "relparcel/metrics.hpp"
#include "relparcel/run_config.hpp"
#include "relparcel/training.hpp"

namespace py = pybind11;
using namespace relparcel;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::from(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(t.shape());
  const auto d = t.data();
  std::copy(d.begin(), d.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["mean_f1"] = r.mean_f1;
  d["mean_f2"] = r.mean_f2;
  d["mean_pe"] = r.mean_pe;
  d["mean_re"] = r.mean_re;
  d["mean_pl"] = r.mean_pl;
  d["mean_rl"] = r.mean_rl;
  return d;
}

}  // namespace

PYBIND11_MODULE(_relparcel, m) {
  m.doc() = "Bindings for the relparcel C++ core.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_readonly("label_names", &Dataset::label_names)
      .def_readonly("channels", &Dataset::channels)
      .def_readonly("image_size", &Dataset::image_size)
      .def("labels", &Dataset::labels)
      .def("image", [](const Dataset& ds, std::size_t i) { return to_array(ds.items.at(i).image); })
      .def("image_id", [](const Dataset& ds, std::size_t i) { return ds.items.at(i).id; })
      .def("subset", &Dataset::subset)
      .def("save", [](const Dataset& ds, const std::string& dir) { save_dataset(ds, dir); });

  m.def(
      "generate_dataset",
      [](std::size_t n, std::uint64_t seed, const std::string& recipe_path) {
        const SceneRecipe recipe =
            recipe_path.empty() ? default_recipe() : SceneRecipe::from_config(ConfigDocument::load(recipe_path));
        recipe.validate();
        return generate_dataset(recipe, n, seed);
      },
      py::arg("n"), py::arg("seed"), py::arg("recipe_path") = "");
  m.def("load_dataset", &load_dataset, py::arg("dir"));

  py::class_<Model>(m, "Model")
      .def_property_readonly("num_labels", &Model::num_labels)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("predict", [](const Model& model, const Array& image) { return model.predict(to_tensor(image)); });

  m.def(
      "load_model", [](const std::string& path) { return load_checkpoint(path).model; }, py::arg("path"));

  m.def(
      "train",
      [](const Dataset& ds, const std::string& config_path, std::uint64_t seed) {
        RunConfig cfg = run_config_for(ds, config_path);
        cfg.validate();
        TrainResult r = [&] {
          py::gil_scoped_release release;
          return train(cfg.model, cfg.train, ds, seed);
        }();
        py::list history;
        for (const auto& e : r.state.history) {
          history.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_loss") = e.train_loss,
                                  py::arg("val_loss") = e.val_loss, py::arg("lr") = e.lr));
        }
        return py::make_tuple(std::move(r.model), history, report_dict(r.final_train_report));
      },
      py::arg("dataset"), py::arg("config_path") = "", py::arg("seed") = 0,
      "Returns (model, per-epoch history, metrics of the final model on the dataset).");

  m.def(
      "evaluate",
      [](const Model& model, const Dataset& ds, double threshold) {
        const Evaluation ev = evaluate(model, ds, threshold);
        py::dict d = report_dict(ev.report);
        d["mean_loss"] = ev.mean_loss;
        d["predictions"] = ev.predictions;
        return d;
      },
      py::arg("model"), py::arg("dataset"), py::arg("threshold") = 0.5);

  m.def("f_beta", &f_beta, py::arg("precision"), py::arg("recall"), py::arg("beta"));
  m.def(
      "dataset_metrics",
      [](const std::vector<MultiHotLabel>& preds, const std::vector<MultiHotLabel>& gts) {
        return report_dict(dataset_metrics(preds, gts));
      },
      py::arg("predictions"), py::arg("ground_truth"));
  m.def(
      "binarize", [](const std::vector<double>& p, double tau) { return binarize(p, tau); }, py::arg("probabilities"),
      py::arg("threshold") = 0.5);

  m.def(
      "grad_check_suite",
      [](unsigned long long seed) {
        std::vector<std::tuple<std::string, double, double>> out;
        for (const auto& e : run_grad_check_suite(seed)) out.emplace_back(e.name, e.max_rel_error, e.tolerance);
        return out;
      },
      py::arg("seed") = 0, "Returns (name, max relative error, tolerance) per checked component.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "relparcel");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI subcommand in-process; returns (exit code, stdout, stderr).");
}
