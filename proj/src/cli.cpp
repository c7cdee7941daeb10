#include "adbn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "adbn/checkpoint.hpp"
#include "adbn/config.hpp"
#include "adbn/dataset.hpp"
#include "adbn/dbn.hpp"
#include "adbn/fsutil.hpp"
#include "adbn/metrics.hpp"

namespace adbn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed substreams of one run: dataset generation, dataset split, training.
constexpr std::uint64_t kSeedStreamData = 1;
constexpr std::uint64_t kSeedStreamSplit = 2;
constexpr std::uint64_t kSeedStreamTrain = 3;

void refuse_overwrite(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw DatasetError("refusing to overwrite " + path.string() + " (pass --force)");
  }
}

struct LoadedData {
  LabeledDataset train;
  LabeledDataset test;
};

LoadedData load_training_data(const RunConfig& config, std::ostream& err) {
  LoadedData out;
  if (config.data.type == "synthetic") {
    if (config.task_shape() == TaskShape::Combined) {
      throw ConfigError("task", "synthetic data is binary; combined mode needs an sdnet tree");
    }
    LabeledDataset full = generate_synthetic(config.data.n, config.data.crack_fraction,
                                             config.preprocess.target_side,
                                             derive_seed(config.seed, kSeedStreamData));
    std::tie(out.train, out.test) =
        split_dataset(full, config.data.test_fraction, derive_seed(config.seed, kSeedStreamSplit));
  } else {
    const std::optional<Structure> subset =
        config.task_subset() ? config.task_subset() : config.data.subset;
    SdnetLoadResult loaded = load_sdnet(config.data.root, subset, config.preprocess,
                                        config.task_shape(), config.data.naming);
    for (const auto& warning : loaded.warnings) err << "warning: " << warning << "\n";
    out.train = std::move(loaded.train);
    out.test = std::move(loaded.test);
  }
  if (out.train.empty()) throw DatasetError("training split is empty");
  return out;
}

json report_to_json(const EvalReport& report, bool used_overrides) {
  json categories = json::array();
  for (const auto& category : report.categories) {
    categories.push_back({{"name", category.name},
                          {"total", category.total},
                          {"incorrect", category.incorrect},
                          {"accuracy", category.accuracy()}});
  }
  json confusion = json::array();
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) row.push_back(report.confusion(r, c));
    confusion.push_back(std::move(row));
  }
  return json{{"categories", std::move(categories)},
              {"confusion", std::move(confusion)},
              {"total", report.total},
              {"incorrect", report.incorrect},
              {"accuracy", report.accuracy()},
              {"fine_tune", used_overrides}};
}

MetricsLog build_metrics_log(const AdaptiveTrainResult& result) {
  // Weave epoch rows and structural events into (layer, epoch) order; the
  // epoch row precedes the events it triggered, and a layer event follows
  // the last epoch of the layer whose statistics triggered it.
  struct Entry {
    std::tuple<int, int, int> key;
    bool is_event;
    std::size_t index;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < result.epoch_stats.size(); ++i) {
    entries.push_back({{result.epoch_layer[i], result.epoch_stats[i].epoch, 0}, false, i});
  }
  for (std::size_t i = 0; i < result.events.size(); ++i) {
    const StructuralEvent& event = result.events[i];
    const int layer_of_occurrence =
        event.kind == StructuralEvent::Kind::Layer ? event.layer - 1 : event.layer;
    const int tiebreak = event.kind == StructuralEvent::Kind::Layer ? 2 : 1;
    entries.push_back({{layer_of_occurrence, event.epoch, tiebreak}, true, i});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.key < b.key; });

  MetricsLog log;
  for (const Entry& entry : entries) {
    if (entry.is_event) {
      log.add_event(result.events[entry.index]);
    } else {
      const std::size_t i = entry.index;
      log.add_epoch(result.epoch_stats[i].epoch, result.epoch_layer[i],
                    result.epoch_stats[i].reconstruction_error, result.epoch_stats[i].mean_energy,
                    result.epoch_wd_total[i], result.epoch_hidden_count[i]);
    }
  }
  return log;
}

std::string format_structure_report(const Checkpoint& checkpoint) {
  std::ostringstream out;
  out << "status: " << checkpoint.status << "\n";
  out << "task: " << checkpoint.config.task << "\n";
  out << "layers: " << checkpoint.model.layers.size() << "\n";
  for (std::size_t l = 0; l < checkpoint.model.layers.size(); ++l) {
    const auto& layer = checkpoint.model.layers[l];
    out << "  layer " << l << ": " << layer.visible_size() << " -> " << layer.hidden_size()
        << "\n";
  }
  out << "override table: " << checkpoint.model.overrides.size() << " pattern(s)\n";
  out << "structural events: " << checkpoint.events.size() << "\n";
  for (const auto& event : checkpoint.events) {
    out << "  epoch " << event.epoch << " layer " << event.layer << " "
        << StructuralEvent::kind_name(event.kind) << " (" << event.detail << ")\n";
  }
  if (!checkpoint.final_metrics.empty()) {
    out << "final metrics: " << checkpoint.final_metrics.dump() << "\n";
  }
  return out.str();
}

// --data accepts a directory tree, a dataset cache file, or
// "synth[:key=value,...]" with keys n, fraction, seed (defaults come from
// the checkpoint's own data config so training-time splits reproduce).
LabeledDataset resolve_data_spec(const std::string& spec, const std::string& split,
                                 const Checkpoint& checkpoint, std::ostream& err) {
  const RunConfig& config = checkpoint.config;
  LabeledDataset result;

  if (spec.rfind("synth", 0) == 0 && (spec.size() == 5 || spec[5] == ':')) {
    int n = config.data.n;
    double fraction = config.data.crack_fraction;
    std::uint64_t generator_seed = derive_seed(config.seed, kSeedStreamData);
    if (spec.size() > 6) {
      std::istringstream args(spec.substr(6));
      std::string pair;
      while (std::getline(args, pair, ',')) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos) throw ConfigError("data", "bad synth spec entry: " + pair);
        const std::string key = pair.substr(0, eq);
        const std::string value = pair.substr(eq + 1);
        try {
          if (key == "n") {
            n = std::stoi(value);
          } else if (key == "fraction") {
            fraction = std::stod(value);
          } else if (key == "seed") {
            generator_seed = std::stoull(value);
          } else if (key == "side") {
            if (std::stoi(value) != config.preprocess.target_side) {
              throw FormatError("synth side " + value + " does not match checkpoint descriptor [" +
                                config.preprocess.to_string() + "]");
            }
          } else {
            throw ConfigError("data", "unknown synth spec key: " + key);
          }
        } catch (const std::invalid_argument&) {
          throw ConfigError("data", "bad synth spec value: " + pair);
        }
      }
    }
    LabeledDataset full =
        generate_synthetic(n, fraction, config.preprocess.target_side, generator_seed);
    if (split == "all") {
      result = std::move(full);
    } else {
      auto [train, test] = split_dataset(full, config.data.test_fraction,
                                         derive_seed(config.seed, kSeedStreamSplit));
      result = split == "train" ? std::move(train) : std::move(test);
    }
  } else if (fs::is_directory(spec)) {
    const std::optional<Structure> subset =
        config.task_subset() ? config.task_subset() : config.data.subset;
    SdnetLoadResult loaded =
        load_sdnet(spec, subset, config.preprocess, config.task_shape(), config.data.naming);
    for (const auto& warning : loaded.warnings) err << "warning: " << warning << "\n";
    if (split == "train") {
      result = std::move(loaded.train);
    } else if (split == "test") {
      result = std::move(loaded.test);
    } else {
      result = std::move(loaded.train);
      for (auto& sample : loaded.test.samples) result.samples.push_back(std::move(sample));
    }
  } else if (fs::is_regular_file(spec)) {
    result = load_dataset_cache(spec, config.preprocess);
    if (split != "all") {
      err << "warning: --split ignored for cache files (single split)\n";
    }
  } else {
    throw DatasetError("unrecognized data spec: " + spec);
  }

  if (result.empty()) throw DatasetError("resolved dataset is empty (" + spec + ", split=" + split + ")");
  return result;
}

struct TrainArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string relabels;
  bool fine_tune = false;
  bool force = false;
};

void write_run_outputs(const fs::path& out_dir, const Checkpoint& checkpoint,
                       const MetricsLog& metrics) {
  save_checkpoint(out_dir / "checkpoint.json", checkpoint);
  metrics.write_csv(out_dir / "metrics.csv");
  write_file_atomic(out_dir / "config.json", checkpoint.config.to_json().dump(2) + "\n");
  write_file_atomic(out_dir / "structure.txt", format_structure_report(checkpoint));
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config = RunConfig::load(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;
  if (args.fine_tune) config.training.fine_tune = true;
  config.validate();

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  refuse_overwrite(out_dir / "checkpoint.json", args.force);

  LoadedData data = load_training_data(config, err);
  if (!args.relabels.empty()) {
    const RelabelMap relabels = read_relabel_file(args.relabels);
    const std::size_t applied = apply_relabels(data.train, relabels, config.task_shape()) +
                                apply_relabels(data.test, relabels, config.task_shape());
    out << "applied " << applied << " relabel(s)\n";
  }

  Rng rng(derive_seed(config.seed, kSeedStreamTrain));
  Checkpoint checkpoint;
  checkpoint.config = config;

  AdaptiveTrainResult result;
  try {
    result = train_adaptive(data.train, config.trainer_options(), config.structure, rng);
  } catch (const TrainAbortedError& e) {
    checkpoint.status = "aborted-numeric";
    checkpoint.model = e.partial().model;
    checkpoint.events = e.partial().events;
    checkpoint.final_metrics = json{{"error", e.what()}};
    write_run_outputs(out_dir, checkpoint, build_metrics_log(e.partial()));
    err << "error: " << e.what() << " (last-good checkpoint written to "
        << (out_dir / "checkpoint.json").string() << ")\n";
    return kExitNumeric;
  }

  checkpoint.model = result.model;
  checkpoint.events = result.events;
  if (config.training.fine_tune) {
    checkpoint.model = fine_tune(checkpoint.model, data.train);
  }

  json final_metrics;
  json layer_sizes = json::array();
  for (const auto& layer : checkpoint.model.layers) layer_sizes.push_back(layer.hidden_size());
  final_metrics["layer_sizes"] = std::move(layer_sizes);
  final_metrics["override_count"] = checkpoint.model.overrides.size();
  const bool overrides_active = config.training.fine_tune;
  {
    const EvalReport train_report = evaluate(checkpoint.model, data.train, overrides_active);
    final_metrics["train"] = report_to_json(train_report, overrides_active);
    out << "train:\n" << train_report.to_text();
  }
  if (!data.test.empty()) {
    const EvalReport test_report = evaluate(checkpoint.model, data.test, overrides_active);
    final_metrics["test"] = report_to_json(test_report, overrides_active);
    out << "test:\n" << test_report.to_text();
  }
  checkpoint.final_metrics = std::move(final_metrics);

  write_run_outputs(out_dir, checkpoint, build_metrics_log(result));
  out << "checkpoint: " << (out_dir / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_spec,
                 const std::string& split, bool use_fine_tune, const std::string& out_dir,
                 bool force, std::ostream& out, std::ostream& err) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const LabeledDataset data = resolve_data_spec(data_spec, split, checkpoint, err);
  const EvalReport report = evaluate(checkpoint.model, data, use_fine_tune);
  out << report.to_text();

  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    refuse_overwrite(dir / "report.json", force);
    write_file_atomic(dir / "report.json",
                      report_to_json(report, use_fine_tune).dump(2) + "\n");
    write_file_atomic(dir / "report.txt", report.to_text());
  }
  return kExitOk;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& image_path,
                std::ostream& out, std::ostream&) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const RasterImage image = decode_image(image_path);
  const Eigen::VectorXd pixels = preprocess(image, checkpoint.config.preprocess.target_side);
  const Prediction prediction = predict(checkpoint.model, pixels, true);

  out << "label: " << checkpoint.model.label_names[static_cast<std::size_t>(prediction.label)]
      << "\n";
  out << "probabilities:";
  for (Eigen::Index k = 0; k < prediction.probabilities.size(); ++k) {
    out << " " << checkpoint.model.label_names[static_cast<std::size_t>(k)] << "="
        << format_double(prediction.probabilities(k));
  }
  out << "\n";
  out << "override_fired: " << (prediction.override_fired ? "yes" : "no") << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint_path, std::ostream& out, std::ostream&) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  out << format_structure_report(checkpoint);
  return kExitOk;
}

std::string sanitize_filename(std::string name) {
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return name;
}

int cmd_export_misclassified(const std::string& checkpoint_path, const std::string& data_spec,
                             const std::string& split, const std::string& out_dir,
                             bool use_fine_tune, bool force, std::ostream& out,
                             std::ostream& err) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const LabeledDataset data = resolve_data_spec(data_spec, split, checkpoint, err);

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DatasetError("output directory not writable: " + dir.string());
  }
  refuse_overwrite(dir / "manifest.csv", force);

  std::ostringstream manifest;
  std::ostringstream relabels;
  manifest << "source,true_label,predicted_label,probability\n";
  relabels << "source,label\n";

  std::size_t exported = 0;
  const int side = checkpoint.config.preprocess.target_side;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const LabeledSample& sample = data.samples[i];
    const Prediction prediction = predict(checkpoint.model, sample.pixels, use_fine_tune);
    if (prediction.label == sample.label) continue;

    const std::string& true_name = data.label_names[static_cast<std::size_t>(sample.label)];
    const std::string& predicted_name =
        data.label_names[static_cast<std::size_t>(prediction.label)];
    const fs::path bucket = dir / (true_name + "__predicted-" + predicted_name);
    fs::create_directories(bucket);

    fs::path target;
    if (fs::exists(sample.source)) {
      target = bucket / (std::to_string(exported) + "_" +
                         fs::path(sample.source).filename().string());
      fs::copy_file(sample.source, target, fs::copy_options::overwrite_existing);
    } else {
      target = bucket / (std::to_string(exported) + "_" + sanitize_filename(sample.source) + ".png");
      encode_gray_png(target, sample.pixels, side);
    }

    manifest << sample.source << "," << true_name << "," << predicted_name << ","
             << format_double(prediction.probabilities(prediction.label)) << "\n";
    relabels << sample.source << "," << sample.label << "\n";
    ++exported;
  }

  write_file_atomic(dir / "manifest.csv", manifest.str());
  write_file_atomic(dir / "relabels.csv", relabels.str());
  out << "exported " << exported << " misclassified sample(s) to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& out_dir, int n, double fraction, int side, std::uint64_t seed,
              double test_fraction, bool force, std::ostream& out, std::ostream&) {
  const LabeledDataset dataset = generate_synthetic(n, fraction, side, seed);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  refuse_overwrite(dir / "manifest.json", force);

  std::vector<std::pair<std::string, const LabeledDataset*>> splits;
  LabeledDataset train, test;
  if (test_fraction > 0.0) {
    std::tie(train, test) = split_dataset(dataset, test_fraction, derive_seed(seed, kSeedStreamSplit));
    splits = {{"train", &train}, {"test", &test}};
  } else {
    splits = {{"", &dataset}};
  }

  json counts = json::object();
  for (const auto& [split_name, split_data] : splits) {
    for (std::size_t i = 0; i < split_data->samples.size(); ++i) {
      const LabeledSample& sample = split_data->samples[i];
      fs::path bucket = dir;
      if (!split_name.empty()) bucket /= split_name;
      bucket /= "D";
      bucket /= sample.cracked ? "CD" : "UD";
      fs::create_directories(bucket);
      encode_gray_png(bucket / (sanitize_filename(sample.source) + ".png"), sample.pixels, side);
    }
    const std::string key = split_name.empty() ? "all" : split_name;
    counts[key] = {{"total", split_data->size()}};
  }

  json manifest;
  manifest["seed"] = seed;
  manifest["side"] = side;
  manifest["crack_fraction"] = fraction;
  manifest["counts"] = std::move(counts);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << dataset.size() << " image(s) under " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive structural DBN for crack/no-crack image classification"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::uint64_t seed_override = 0;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", train_args.config_path, "Run configuration (JSON)")->required();
  auto* seed_opt = train->add_option("--seed", seed_override, "Override the config seed");
  train->add_option("--out", train_args.out_dir, "Override the output directory");
  train->add_option("--relabels", train_args.relabels, "CSV of source,label overrides");
  train->add_flag("--fine-tune", train_args.fine_tune, "Force the fine-tuning pass");
  train->add_flag("--force", train_args.force, "Overwrite existing outputs");

  std::string eval_checkpoint, eval_data, eval_split = "all", eval_out;
  bool eval_fine_tune = false, eval_force = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  evaluate_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  evaluate_cmd->add_option("--data", eval_data, "Dataset: directory, cache file, or synth[:k=v,...]")
      ->required();
  evaluate_cmd->add_option("--split", eval_split, "all|train|test")
      ->check(CLI::IsMember({"all", "train", "test"}));
  evaluate_cmd->add_flag("--fine-tune", eval_fine_tune, "Apply the override table");
  evaluate_cmd->add_option("--out", eval_out, "Write report.json/report.txt here");
  evaluate_cmd->add_flag("--force", eval_force, "Overwrite existing outputs");

  std::string predict_checkpoint, predict_image;
  auto* predict_cmd = app.add_subcommand("predict", "Classify a single image");
  predict_cmd->add_option("--checkpoint", predict_checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--image", predict_image, "Image file")->required();

  std::string inspect_checkpoint;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the discovered structure");
  inspect_cmd->add_option("--checkpoint", inspect_checkpoint, "Checkpoint file")->required();

  std::string export_checkpoint, export_data, export_split = "test", export_out;
  bool export_fine_tune = false, export_force = false;
  auto* export_cmd =
      app.add_subcommand("export-misclassified", "Write misclassified samples for expert audit");
  export_cmd->add_option("--checkpoint", export_checkpoint, "Checkpoint file")->required();
  export_cmd->add_option("--data", export_data, "Dataset spec (see evaluate)")->required();
  export_cmd->add_option("--split", export_split, "all|train|test")
      ->check(CLI::IsMember({"all", "train", "test"}));
  export_cmd->add_option("--out", export_out, "Export directory")->required();
  export_cmd->add_flag("--fine-tune", export_fine_tune, "Apply the override table");
  export_cmd->add_flag("--force", export_force, "Overwrite existing outputs");

  std::string synth_out;
  int synth_n = 200, synth_side = 32;
  double synth_fraction = 0.5, synth_test_fraction = 0.0;
  std::uint64_t synth_seed = 1;
  bool synth_force = false;
  auto* synth_cmd = app.add_subcommand("synth", "Emit a synthetic crack dataset to disk");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--n", synth_n, "Number of images");
  synth_cmd->add_option("--crack-fraction", synth_fraction, "Fraction of cracked images");
  synth_cmd->add_option("--side", synth_side, "Image side length");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--test-fraction", synth_test_fraction,
                        "Also split into train/ and test/ subtrees");
  synth_cmd->add_flag("--force", synth_force, "Overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) {
      if (seed_opt->count() > 0) train_args.seed = seed_override;
      return cmd_train(train_args, out, err);
    }
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(eval_checkpoint, eval_data, eval_split, eval_fine_tune, eval_out,
                          eval_force, out, err);
    }
    if (predict_cmd->parsed()) return cmd_predict(predict_checkpoint, predict_image, out, err);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_checkpoint, out, err);
    if (export_cmd->parsed()) {
      return cmd_export_misclassified(export_checkpoint, export_data, export_split, export_out,
                                      export_fine_tune, export_force, out, err);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_out, synth_n, synth_fraction, synth_side, synth_seed,
                       synth_test_fraction, synth_force, out, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DatasetError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace adbn
