#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "adbn/checkpoint.hpp"
#include "adbn/config.hpp"
#include "adbn/dataset.hpp"
#include "adbn/dbn.hpp"
#include "adbn/exact.hpp"
#include "adbn/rbm.hpp"
#include "adbn/structure.hpp"

namespace py = pybind11;
using namespace adbn;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive structural DBN: growing/shrinking RBM stack for crack classification";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<EnumerationLimitError>(m, "EnumerationLimitError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);

  py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));

  py::class_<RbmParameters>(m, "RbmParameters")
      .def(py::init<>())
      .def_readwrite("visible_bias", &RbmParameters::visible_bias)
      .def_readwrite("hidden_bias", &RbmParameters::hidden_bias)
      .def_readwrite("weights", &RbmParameters::weights)
      .def_property_readonly("visible_size", &RbmParameters::visible_size)
      .def_property_readonly("hidden_size", &RbmParameters::hidden_size)
      .def_static("zeros", &RbmParameters::zeros, py::arg("visible"), py::arg("hidden"))
      .def_static("random_init", &RbmParameters::random_init, py::arg("visible"),
                  py::arg("hidden"), py::arg("sigma"), py::arg("rng"));

  py::class_<CdStats>(m, "CdStats")
      .def_readonly("epoch", &CdStats::epoch)
      .def_readonly("reconstruction_error", &CdStats::reconstruction_error)
      .def_readonly("mean_energy", &CdStats::mean_energy)
      .def_readonly("grad_norm_c", &CdStats::grad_norm_c)
      .def_readonly("grad_norm_W", &CdStats::grad_norm_W);

  py::class_<GradientTriple>(m, "GradientTriple")
      .def_readonly("d_visible_bias", &GradientTriple::d_visible_bias)
      .def_readonly("d_hidden_bias", &GradientTriple::d_hidden_bias)
      .def_readonly("d_weights", &GradientTriple::d_weights);

  py::class_<CdOptions>(m, "CdOptions")
      .def(py::init<>())
      .def_readwrite("k", &CdOptions::k)
      .def_readwrite("learning_rate", &CdOptions::learning_rate)
      .def_readwrite("momentum", &CdOptions::momentum)
      .def_readwrite("weight_decay", &CdOptions::weight_decay);

  m.def("energy", &energy, py::arg("v"), py::arg("h"), py::arg("params"));
  m.def("hidden_conditional",
        py::overload_cast<const Eigen::VectorXd&, const RbmParameters&>(&hidden_conditional),
        py::arg("v"), py::arg("params"));
  m.def("hidden_conditional_batch",
        py::overload_cast<const Eigen::MatrixXd&, const RbmParameters&>(&hidden_conditional),
        py::arg("batch"), py::arg("params"));
  m.def("visible_conditional",
        py::overload_cast<const Eigen::VectorXd&, const RbmParameters&>(&visible_conditional),
        py::arg("h"), py::arg("params"));
  m.def("reconstruction_error", &reconstruction_error, py::arg("params"), py::arg("batch"));
  m.def(
      "cd_update",
      [](const RbmParameters& params, const Eigen::MatrixXd& batch, const CdOptions& options,
         Rng& rng) { return cd_update(params, batch, options, rng); },
      py::arg("params"), py::arg("batch"), py::arg("options"), py::arg("rng"));

  m.def("partition_function", &partition_function, py::arg("params"));
  m.def("joint_probability", &joint_probability, py::arg("v"), py::arg("h"), py::arg("params"));
  m.def("exact_log_likelihood", &exact_log_likelihood, py::arg("params"), py::arg("batch"));
  m.def("exact_loglik_gradient", &exact_loglik_gradient, py::arg("params"), py::arg("batch"));

  py::class_<WdSnapshot>(m, "WdSnapshot")
      .def_readonly("epoch", &WdSnapshot::epoch)
      .def_readonly("wd_hidden_bias", &WdSnapshot::wd_hidden_bias)
      .def_readonly("wd_weights", &WdSnapshot::wd_weights)
      .def_readonly("wd_total", &WdSnapshot::wd_total);

  py::class_<WdTrace>(m, "WdTrace")
      .def(py::init<int>(), py::arg("window") = 5)
      .def("push", &WdTrace::push)
      .def("reset", &WdTrace::reset)
      .def_property_readonly("window", &WdTrace::window)
      .def("__len__", &WdTrace::size)
      .def("smoothed_c", &WdTrace::smoothed_c)
      .def("smoothed_W", &WdTrace::smoothed_W)
      .def("smoothed_total", &WdTrace::smoothed_total);

  py::class_<StructureConfig>(m, "StructureConfig")
      .def(py::init<>())
      .def_readwrite("theta_G", &StructureConfig::theta_G)
      .def_readwrite("theta_A", &StructureConfig::theta_A)
      .def_readwrite("theta_L1", &StructureConfig::theta_L1)
      .def_readwrite("theta_L2", &StructureConfig::theta_L2)
      .def_readwrite("max_hidden", &StructureConfig::max_hidden)
      .def_readwrite("max_layers", &StructureConfig::max_layers)
      .def_readwrite("warmup_epochs", &StructureConfig::warmup_epochs)
      .def_readwrite("cooldown_epochs", &StructureConfig::cooldown_epochs)
      .def_readwrite("noise_sigma", &StructureConfig::noise_sigma)
      .def_readwrite("wd_window", &StructureConfig::wd_window)
      .def_readwrite("scale_layer_thresholds", &StructureConfig::scale_layer_thresholds)
      .def_readwrite("wd_stop_epsilon", &StructureConfig::wd_stop_epsilon)
      .def_readwrite("annihilation", &StructureConfig::annihilation)
      .def("validate", &StructureConfig::validate, py::arg("initial_hidden") = 1);

  m.def("walking_distance", &walking_distance, py::arg("prev"), py::arg("curr"),
        py::arg("epoch") = 0);
  m.def("check_generation", &check_generation, py::arg("trace"), py::arg("params"),
        py::arg("config"));
  m.def("generate_neuron", &generate_neuron, py::arg("params"), py::arg("parent"),
        py::arg("noise_sigma"), py::arg("rng"));
  m.def("check_annihilation", &check_annihilation, py::arg("params"), py::arg("data"),
        py::arg("config"));
  m.def("annihilate", &annihilate, py::arg("params"), py::arg("victims"));

  py::class_<StructuralEvent>(m, "StructuralEvent")
      .def_property_readonly("kind",
                             [](const StructuralEvent& e) {
                               return std::string(StructuralEvent::kind_name(e.kind));
                             })
      .def_readonly("epoch", &StructuralEvent::epoch)
      .def_readonly("layer", &StructuralEvent::layer)
      .def_readonly("detail", &StructuralEvent::detail);

  py::class_<RbmTrainOptions>(m, "RbmTrainOptions")
      .def(py::init<>())
      .def_readwrite("epochs", &RbmTrainOptions::epochs)
      .def_readwrite("batch_size", &RbmTrainOptions::batch_size)
      .def_readwrite("cd", &RbmTrainOptions::cd)
      .def_readwrite("adaptive", &RbmTrainOptions::adaptive);

  py::class_<RbmTrainResult>(m, "RbmTrainResult")
      .def_readonly("params", &RbmTrainResult::params)
      .def_readonly("epoch_stats", &RbmTrainResult::epoch_stats)
      .def_readonly("epoch_wd", &RbmTrainResult::epoch_wd)
      .def_readonly("epoch_hidden", &RbmTrainResult::epoch_hidden)
      .def_readonly("events", &RbmTrainResult::events)
      .def_readonly("final_wd_total", &RbmTrainResult::final_wd_total)
      .def_readonly("final_mean_energy", &RbmTrainResult::final_mean_energy)
      .def_readonly("epochs_run", &RbmTrainResult::epochs_run);

  m.def("train_rbm_adaptive", &train_rbm_adaptive, py::arg("params"), py::arg("data"),
        py::arg("options"), py::arg("config"), py::arg("rng"), py::arg("layer_index") = 0);

  py::enum_<Structure>(m, "Structure")
      .value("Deck", Structure::Deck)
      .value("Wall", Structure::Wall)
      .value("Pavement", Structure::Pavement);

  py::enum_<TaskShape>(m, "TaskShape")
      .value("Binary", TaskShape::Binary)
      .value("Combined", TaskShape::Combined);

  py::class_<PreprocessDescriptor>(m, "PreprocessDescriptor")
      .def(py::init<>())
      .def_readwrite("target_side", &PreprocessDescriptor::target_side)
      .def_readwrite("grayscale", &PreprocessDescriptor::grayscale)
      .def_readwrite("normalization", &PreprocessDescriptor::normalization)
      .def("__repr__", &PreprocessDescriptor::to_string);

  py::class_<LabeledSample>(m, "LabeledSample")
      .def_readwrite("pixels", &LabeledSample::pixels)
      .def_readwrite("label", &LabeledSample::label)
      .def_readwrite("structure", &LabeledSample::structure)
      .def_readwrite("cracked", &LabeledSample::cracked)
      .def_readwrite("source", &LabeledSample::source);

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def(py::init<>())
      .def_readwrite("samples", &LabeledDataset::samples)
      .def_readwrite("label_names", &LabeledDataset::label_names)
      .def_readwrite("descriptor", &LabeledDataset::descriptor)
      .def("__len__", &LabeledDataset::size);

  m.def("data_matrix", &data_matrix, py::arg("dataset"));
  m.def("generate_synthetic", &generate_synthetic, py::arg("n"), py::arg("crack_fraction"),
        py::arg("side"), py::arg("seed"));
  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("test_fraction"),
        py::arg("seed"));
  m.def(
      "load_image",
      [](const std::filesystem::path& path, int target_side) {
        return preprocess(decode_image(path), target_side);
      },
      py::arg("path"), py::arg("target_side"), "Decode and preprocess one image file.");
  m.def("save_dataset_cache", &save_dataset_cache, py::arg("path"), py::arg("dataset"));
  m.def(
      "load_dataset_cache",
      [](const std::filesystem::path& path) { return load_dataset_cache(path); },
      py::arg("path"));

  py::class_<DbnModel>(m, "DbnModel")
      .def(py::init<>())
      .def_readwrite("layers", &DbnModel::layers)
      .def_readwrite("head_weights", &DbnModel::head_weights)
      .def_readwrite("head_bias", &DbnModel::head_bias)
      .def_readwrite("label_names", &DbnModel::label_names)
      .def_readwrite("input_dim", &DbnModel::input_dim)
      .def_readwrite("overrides", &DbnModel::overrides)
      .def_property_readonly("num_classes", &DbnModel::num_classes)
      .def_property_readonly("top_dim", &DbnModel::top_dim)
      .def_static("create", &DbnModel::create, py::arg("input_dim"), py::arg("initial_hidden"),
                  py::arg("label_names"), py::arg("rng"));

  m.def("propagate", &propagate, py::arg("model"), py::arg("v"));
  m.def("top_features",
        py::overload_cast<const DbnModel&, const Eigen::VectorXd&>(&top_features),
        py::arg("model"), py::arg("v"));
  m.def("classify", &classify, py::arg("model"), py::arg("v"));
  m.def("activation_pattern", &activation_pattern, py::arg("features"));

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("label", &Prediction::label)
      .def_readonly("probabilities", &Prediction::probabilities)
      .def_readonly("override_fired", &Prediction::override_fired);

  m.def("predict", &predict, py::arg("model"), py::arg("v"), py::arg("use_overrides"));
  m.def("train_head", &train_head, py::arg("model"), py::arg("train"), py::arg("epochs"),
        py::arg("learning_rate"), py::arg("batch_size"), py::arg("rng"));

  py::class_<LayerStats>(m, "LayerStats")
      .def(py::init<>())
      .def_readwrite("wd_total", &LayerStats::wd_total)
      .def_readwrite("energy_magnitude", &LayerStats::energy_magnitude);

  m.def("check_layer_generation", &check_layer_generation, py::arg("stats"), py::arg("config"));
  m.def("append_layer", &append_layer, py::arg("model"), py::arg("initial_hidden"),
        py::arg("rng"));

  py::class_<DbnTrainOptions>(m, "DbnTrainOptions")
      .def(py::init<>())
      .def_readwrite("rbm", &DbnTrainOptions::rbm)
      .def_readwrite("initial_hidden", &DbnTrainOptions::initial_hidden)
      .def_readwrite("head_epochs", &DbnTrainOptions::head_epochs)
      .def_readwrite("head_learning_rate", &DbnTrainOptions::head_learning_rate)
      .def_readwrite("head_batch_size", &DbnTrainOptions::head_batch_size);

  py::class_<AdaptiveTrainResult>(m, "AdaptiveTrainResult")
      .def_readonly("model", &AdaptiveTrainResult::model)
      .def_readonly("events", &AdaptiveTrainResult::events)
      .def_readonly("epoch_stats", &AdaptiveTrainResult::epoch_stats)
      .def_readonly("epoch_layer", &AdaptiveTrainResult::epoch_layer);

  m.def("train_adaptive", &train_adaptive, py::arg("train"), py::arg("options"),
        py::arg("config"), py::arg("rng"));
  m.def("fine_tune", &fine_tune, py::arg("model"), py::arg("train"));

  py::class_<CategoryResult>(m, "CategoryResult")
      .def_readonly("name", &CategoryResult::name)
      .def_readonly("total", &CategoryResult::total)
      .def_readonly("incorrect", &CategoryResult::incorrect)
      .def_property_readonly("accuracy", &CategoryResult::accuracy);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("categories", &EvalReport::categories)
      .def_readonly("confusion", &EvalReport::confusion)
      .def_readonly("total", &EvalReport::total)
      .def_readonly("incorrect", &EvalReport::incorrect)
      .def_property_readonly("accuracy", &EvalReport::accuracy)
      .def("to_text", &EvalReport::to_text);

  m.def("evaluate", &evaluate, py::arg("model"), py::arg("data"), py::arg("use_overrides"));
  m.def("count_misclassified", &count_misclassified, py::arg("model"), py::arg("data"),
        py::arg("use_overrides"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init<>())
      .def_readwrite("format_version", &Checkpoint::format_version)
      .def_readwrite("status", &Checkpoint::status)
      .def_readwrite("model", &Checkpoint::model)
      .def_readwrite("events", &Checkpoint::events);

  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("checkpoint"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
}
