#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "adbn/checkpoint.hpp"
#include "adbn/cli.hpp"
#include "adbn/dataset.hpp"
#include "adbn/fsutil.hpp"

using namespace adbn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("adbn_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"adbn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json small_config(const fs::path& out_dir) {
  json config;
  config["task"] = "binary";
  config["seed"] = 11;
  config["output_dir"] = out_dir.string();
  config["data"] = {{"type", "synthetic"}, {"n", 60}, {"crack_fraction", 0.5},
                    {"test_fraction", 0.2}};
  config["preprocess"] = {{"target_side", 16}};
  config["structure"] = {{"max_hidden", 8}, {"max_layers", 1}};
  config["training"] = {{"epochs_per_layer", 6},  {"batch_size", 16},
                        {"learning_rate", 0.1},   {"initial_hidden", 4},
                        {"head_epochs", 40},      {"head_learning_rate", 0.5},
                        {"fine_tune", true}};
  return config;
}

fs::path write_config(const fs::path& dir, const json& config) {
  const fs::path path = dir / "config.json";
  write_file_atomic(path, config.dump(2));
  return path;
}

// Shared tiny training run; everything downstream (evaluate, predict,
// export) reuses it instead of retraining per test case.
const fs::path& trained_run() {
  static const fs::path dir = [] {
    const fs::path d = fresh_dir("shared_run");
    const fs::path config = write_config(d, small_config(d / "run"));
    const CliResult r = run({"train", "--config", config.string()});
    REQUIRE(r.code == kExitOk);
    return d;
  }();
  return dir;
}

fs::path trained_checkpoint() { return trained_run() / "run" / "checkpoint.json"; }

}  // namespace

TEST_SUITE_BEGIN("trainer-cli");

TEST_CASE("train writes a reloadable checkpoint, metrics, and a config echo") {
  const fs::path dir = trained_run();
  const fs::path run_dir = dir / "run";
  CHECK(fs::exists(run_dir / "checkpoint.json"));
  CHECK(fs::exists(run_dir / "metrics.csv"));
  CHECK(fs::exists(run_dir / "config.json"));
  CHECK(fs::exists(run_dir / "structure.txt"));

  const Checkpoint checkpoint = load_checkpoint(run_dir / "checkpoint.json");
  CHECK(checkpoint.status == "ok");
  CHECK(checkpoint.model.layers.size() == 1);
  CHECK(checkpoint.final_metrics.contains("train"));
  CHECK(checkpoint.final_metrics.contains("test"));

  // One epoch row per (layer, epoch); single layer, six epochs.
  const std::string metrics = read_file(run_dir / "metrics.csv");
  std::istringstream lines(metrics);
  std::string line;
  std::getline(lines, line);
  CHECK(line ==
        "row_type,epoch,layer,reconstruction_error,mean_energy,wd_total,hidden_count,event,detail");
  std::size_t epoch_rows = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("epoch,", 0) == 0) ++epoch_rows;
  }
  CHECK(epoch_rows == 6);
}

TEST_CASE("the config echo reproduces the run byte for byte") {
  const fs::path dir = fresh_dir("replay");
  json config = small_config(dir / "first");
  const fs::path config_path = write_config(dir, config);
  REQUIRE(run({"train", "--config", config_path.string()}).code == kExitOk);

  // Feed the echoed config back, redirected to a second directory.
  const CliResult second = run({"train", "--config", (dir / "first" / "config.json").string(),
                                "--out", (dir / "second").string()});
  REQUIRE(second.code == kExitOk);
  CHECK(read_file(dir / "first" / "metrics.csv") == read_file(dir / "second" / "metrics.csv"));
}

TEST_CASE("train rejects a non-positive generation threshold naming the field") {
  const fs::path dir = fresh_dir("badcfg");
  json config = small_config(dir / "run");
  config["structure"]["theta_G"] = -1.0;
  const fs::path config_path = write_config(dir, config);
  const CliResult r = run({"train", "--config", config_path.string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("theta_G") != std::string::npos);
}

TEST_CASE("train refuses to overwrite an existing run without --force") {
  const fs::path dir = fresh_dir("overwrite");
  const fs::path config_path = write_config(dir, small_config(dir / "run"));
  REQUIRE(run({"train", "--config", config_path.string()}).code == kExitOk);
  const CliResult refused = run({"train", "--config", config_path.string()});
  CHECK(refused.code == kExitData);
  CHECK(refused.err.find("--force") != std::string::npos);
  CHECK(run({"train", "--config", config_path.string(), "--force"}).code == kExitOk);
}

TEST_CASE("train exits 4 on numeric blow-up and keeps a checkpoint") {
  const fs::path dir = fresh_dir("blowup");
  json config = small_config(dir / "run");
  config["training"]["learning_rate"] = 1e308;
  config["training"]["epochs_per_layer"] = 5;
  const fs::path config_path = write_config(dir, config);
  const CliResult r = run({"train", "--config", config_path.string()});
  CHECK(r.code == kExitNumeric);
  CHECK(fs::exists(dir / "run" / "checkpoint.json"));
  const Checkpoint checkpoint = load_checkpoint(dir / "run" / "checkpoint.json");
  CHECK(checkpoint.status == "aborted-numeric");
}

TEST_CASE("evaluate on the training split matches the recorded counts") {
  const fs::path out = fresh_dir("evalout");
  const CliResult r = run({"evaluate", "--checkpoint", trained_checkpoint().string(), "--data",
                           "synth", "--split", "train", "--fine-tune", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  const json report = json::parse(read_file(out / "report.json"));
  const Checkpoint checkpoint = load_checkpoint(trained_checkpoint());
  CHECK(report.at("incorrect") == checkpoint.final_metrics.at("train").at("incorrect"));
  CHECK(report.at("total") == checkpoint.final_metrics.at("train").at("total"));
}

TEST_CASE("evaluate renders accuracy cells in the incorrect-over-total style") {
  const CliResult r = run({"evaluate", "--checkpoint", trained_checkpoint().string(), "--data",
                           "synth", "--split", "test"});
  REQUIRE(r.code == kExitOk);
  // e.g. "91.7% (1/12)"
  CHECK(r.out.find("% (") != std::string::npos);
  CHECK(r.out.find("/") != std::string::npos);
  CHECK(r.out.find("overall") != std::string::npos);
}

TEST_CASE("evaluate rejects a cache with a different preprocessing descriptor") {
  const fs::path dir = fresh_dir("descriptor");
  const LabeledDataset other = generate_synthetic(10, 0.5, 32, 3);  // checkpoint used side 16
  save_dataset_cache(dir / "other.dsc", other);
  const CliResult r = run({"evaluate", "--checkpoint", trained_checkpoint().string(), "--data",
                           (dir / "other.dsc").string()});
  CHECK(r.code == kExitFormat);
  CHECK(r.err.find("descriptor") != std::string::npos);
}

TEST_CASE("evaluate accepts a matching cache file") {
  const fs::path dir = fresh_dir("cache_ok");
  const LabeledDataset data = generate_synthetic(10, 0.5, 16, 3);
  save_dataset_cache(dir / "data.dsc", data);
  const CliResult r = run({"evaluate", "--checkpoint", trained_checkpoint().string(), "--data",
                           (dir / "data.dsc").string()});
  CHECK(r.code == kExitOk);
}

TEST_CASE("inspect prints the discovered structure") {
  const CliResult r = run({"inspect", "--checkpoint", trained_checkpoint().string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("layers: 1") != std::string::npos);
  CHECK(r.out.find("override table:") != std::string::npos);
}

TEST_CASE("inspect rejects an unknown checkpoint version") {
  const fs::path dir = fresh_dir("version");
  json doc = json::parse(read_file(trained_checkpoint()));
  doc["format_version"] = 99;
  write_file_atomic(dir / "tampered.json", doc.dump());
  const CliResult r = run({"inspect", "--checkpoint", (dir / "tampered.json").string()});
  CHECK(r.code == kExitFormat);
  CHECK(r.err.find("version") != std::string::npos);
}

TEST_CASE("synth emits a loadable tree and predict agrees with evaluate") {
  const fs::path dir = fresh_dir("synthtree");
  const CliResult s = run({"synth", "--out", dir.string(), "--n", "8", "--crack-fraction", "0.5",
                           "--side", "16", "--seed", "77"});
  REQUIRE(s.code == kExitOk);
  CHECK(fs::exists(dir / "manifest.json"));
  REQUIRE(fs::exists(dir / "D" / "CD"));

  // The tree round-trips through the directory loader.
  const CliResult e = run({"evaluate", "--checkpoint", trained_checkpoint().string(), "--data",
                           dir.string()});
  REQUIRE(e.code == kExitOk);

  fs::path image;
  for (const auto& entry : fs::directory_iterator(dir / "D" / "CD")) {
    image = entry.path();
    break;
  }
  REQUIRE(!image.empty());
  const CliResult p = run({"predict", "--checkpoint", trained_checkpoint().string(), "--image",
                           image.string()});
  REQUIRE(p.code == kExitOk);
  CHECK(p.out.find("label:") != std::string::npos);
  CHECK(p.out.find("probabilities:") != std::string::npos);
  CHECK(p.out.find("override_fired:") != std::string::npos);
}

TEST_CASE("predict exits 3 on an undecodable image naming the file") {
  const fs::path dir = fresh_dir("badimage");
  std::ofstream bad(dir / "broken.png", std::ios::binary);
  bad << "nope";
  bad.close();
  const CliResult r = run({"predict", "--checkpoint", trained_checkpoint().string(), "--image",
                           (dir / "broken.png").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("broken.png") != std::string::npos);
}

TEST_CASE("export-misclassified writes one manifest row and file per error") {
  const fs::path out = fresh_dir("exportdir");
  const CliResult r = run({"export-misclassified", "--checkpoint", trained_checkpoint().string(),
                           "--data", "synth", "--split", "test", "--out", out.string()});
  REQUIRE(r.code == kExitOk);

  const std::string manifest = read_file(out / "manifest.csv");
  std::istringstream lines(manifest);
  std::string line;
  std::getline(lines, line);  // header
  CHECK(line == "source,true_label,predicted_label,probability");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (!line.empty()) ++rows;
  }

  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") ++files;
  }
  CHECK(files == rows);
  CHECK(fs::exists(out / "relabels.csv"));

  // Count against an in-process evaluation of the same split.
  const Checkpoint checkpoint = load_checkpoint(trained_checkpoint());
  LabeledDataset full = generate_synthetic(60, 0.5, 16, derive_seed(11, 1));
  auto [train, test] = split_dataset(full, 0.2, derive_seed(11, 2));
  CHECK(rows == count_misclassified(checkpoint.model, test, false));
}

TEST_CASE("export-misclassified on the fine-tuned training split is empty when perfect") {
  const Checkpoint checkpoint = load_checkpoint(trained_checkpoint());
  const auto recorded = checkpoint.final_metrics.at("train").at("incorrect").get<std::size_t>();
  if (recorded != 0) return;  // fine-tune left training errors; nothing to assert here
  const fs::path out = fresh_dir("export_empty");
  const CliResult r = run({"export-misclassified", "--checkpoint", trained_checkpoint().string(),
                           "--data", "synth", "--split", "train", "--fine-tune", "--out",
                           out.string()});
  REQUIRE(r.code == kExitOk);
  std::istringstream lines(read_file(out / "manifest.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 1);  // header only
}

TEST_CASE("train applies relabel overrides before training") {
  const fs::path dir = fresh_dir("relabel_train");
  const LabeledDataset full = generate_synthetic(60, 0.5, 16, derive_seed(11, 1));
  std::ofstream relabels(dir / "relabels.csv");
  relabels << "source,label\n" << full.samples[0].source << ",0\n";
  relabels.close();

  json config = small_config(dir / "run");
  const fs::path config_path = write_config(dir, config);
  const CliResult r = run({"train", "--config", config_path.string(), "--relabels",
                           (dir / "relabels.csv").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("applied 1 relabel(s)") != std::string::npos);
}

TEST_CASE("unknown flags and missing subcommands exit with usage errors") {
  CHECK(run({"train"}).code == kExitConfig);                      // missing --config
  CHECK(run({"no-such-command"}).code == kExitConfig);
  CHECK(run({"train", "--config", "/nonexistent.json"}).code == kExitConfig);
}

TEST_SUITE_END();
