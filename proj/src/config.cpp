#include "adbn/config.hpp"

#include "adbn/fsutil.hpp"

namespace adbn {

using nlohmann::json;

namespace {

// Pull a field with a type check; JSON errors become ConfigError so the CLI
// can exit with the field name in the message.
template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

std::optional<Structure> parse_structure(const std::string& name, const char* field) {
  if (name.empty() || name == "all") return std::nullopt;
  if (name == "deck") return Structure::Deck;
  if (name == "wall") return Structure::Wall;
  if (name == "pavement") return Structure::Pavement;
  throw ConfigError(field, "unknown structure \"" + name + "\"");
}

}  // namespace

TaskShape RunConfig::task_shape() const {
  return task == "combined" ? TaskShape::Combined : TaskShape::Binary;
}

std::optional<Structure> RunConfig::task_subset() const {
  if (task == "binary" || task == "combined") return std::nullopt;
  return parse_structure(task, "task");
}

void RunConfig::validate() const {
  if (task != "binary" && task != "combined" && task != "deck" && task != "wall" &&
      task != "pavement") {
    throw ConfigError("task", "must be one of binary/deck/wall/pavement/combined");
  }
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (data.type != "synthetic" && data.type != "sdnet") {
    throw ConfigError("data.type", "must be \"synthetic\" or \"sdnet\"");
  }
  if (data.type == "synthetic") {
    if (data.n < 2) throw ConfigError("data.n", "need at least 2 samples");
    if (data.crack_fraction < 0.0 || data.crack_fraction > 1.0) {
      throw ConfigError("crack_fraction", "must lie in [0, 1]");
    }
    if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
      throw ConfigError("test_fraction", "must lie strictly between 0 and 1");
    }
  } else if (data.root.empty()) {
    throw ConfigError("data.root", "must point at the dataset tree");
  }
  if (preprocess.target_side < 8) throw ConfigError("target_side", "must be >= 8");
  structure.validate(training.initial_hidden);
  if (training.epochs_per_layer < 1) throw ConfigError("epochs_per_layer", "must be >= 1");
  if (training.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(training.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
  if (training.cd_k < 1) throw ConfigError("cd_k", "must be >= 1");
  if (training.momentum < 0.0 || training.momentum >= 1.0) {
    throw ConfigError("momentum", "must lie in [0, 1)");
  }
  if (training.weight_decay < 0.0) throw ConfigError("weight_decay", "must be >= 0");
  if (training.initial_hidden < 1) throw ConfigError("initial_hidden", "must be >= 1");
  if (!(training.init_sigma > 0.0)) throw ConfigError("init_sigma", "must be > 0");
  if (training.head_epochs < 1) throw ConfigError("head_epochs", "must be >= 1");
  if (!(training.head_learning_rate > 0.0)) throw ConfigError("head_learning_rate", "must be > 0");
}

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig config;
  read_field(doc, "task", config.task);
  read_field(doc, "seed", config.seed);
  read_field(doc, "output_dir", config.output_dir);

  if (doc.contains("data")) {
    const json& data = doc.at("data");
    read_field(data, "type", config.data.type);
    read_field(data, "n", config.data.n);
    read_field(data, "crack_fraction", config.data.crack_fraction);
    read_field(data, "test_fraction", config.data.test_fraction);
    read_field(data, "root", config.data.root);
    std::string subset;
    read_field(data, "subset", subset);
    config.data.subset = parse_structure(subset, "data.subset");
    if (data.contains("naming")) {
      const json& naming = data.at("naming");
      read_field(naming, "deck_dir", config.data.naming.deck_dir);
      read_field(naming, "wall_dir", config.data.naming.wall_dir);
      read_field(naming, "pavement_dir", config.data.naming.pavement_dir);
      read_field(naming, "cracked_prefix", config.data.naming.cracked_prefix);
      read_field(naming, "uncracked_prefix", config.data.naming.uncracked_prefix);
    }
  }

  if (doc.contains("preprocess")) {
    const json& pre = doc.at("preprocess");
    read_field(pre, "target_side", config.preprocess.target_side);
    read_field(pre, "grayscale", config.preprocess.grayscale);
    read_field(pre, "normalization", config.preprocess.normalization);
  }

  if (doc.contains("structure")) {
    const json& st = doc.at("structure");
    read_field(st, "theta_G", config.structure.theta_G);
    read_field(st, "theta_A", config.structure.theta_A);
    read_field(st, "theta_L1", config.structure.theta_L1);
    read_field(st, "theta_L2", config.structure.theta_L2);
    read_field(st, "max_hidden", config.structure.max_hidden);
    read_field(st, "max_layers", config.structure.max_layers);
    read_field(st, "warmup_epochs", config.structure.warmup_epochs);
    read_field(st, "cooldown_epochs", config.structure.cooldown_epochs);
    read_field(st, "noise_sigma", config.structure.noise_sigma);
    read_field(st, "wd_window", config.structure.wd_window);
    read_field(st, "scale_layer_thresholds", config.structure.scale_layer_thresholds);
    read_field(st, "wd_stop_epsilon", config.structure.wd_stop_epsilon);
    read_field(st, "annihilation", config.structure.annihilation);
  }

  if (doc.contains("training")) {
    const json& tr = doc.at("training");
    read_field(tr, "epochs_per_layer", config.training.epochs_per_layer);
    read_field(tr, "batch_size", config.training.batch_size);
    read_field(tr, "learning_rate", config.training.learning_rate);
    read_field(tr, "cd_k", config.training.cd_k);
    read_field(tr, "momentum", config.training.momentum);
    read_field(tr, "weight_decay", config.training.weight_decay);
    read_field(tr, "initial_hidden", config.training.initial_hidden);
    read_field(tr, "init_sigma", config.training.init_sigma);
    read_field(tr, "data_mean_visible_bias", config.training.data_mean_visible_bias);
    read_field(tr, "head_epochs", config.training.head_epochs);
    read_field(tr, "head_learning_rate", config.training.head_learning_rate);
    read_field(tr, "fine_tune", config.training.fine_tune);
    read_field(tr, "adaptive", config.training.adaptive);
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const DatasetError& e) {
    throw ConfigError("config", e.what());
  } catch (const json::exception& e) {
    throw ConfigError("config", "not valid JSON: " + std::string(e.what()));
  }
  return from_json(doc);
}

json RunConfig::to_json() const {
  json doc;
  doc["task"] = task;
  doc["seed"] = seed;
  doc["output_dir"] = output_dir;
  json data;
  data["type"] = this->data.type;
  if (this->data.type == "synthetic") {
    data["n"] = this->data.n;
    data["crack_fraction"] = this->data.crack_fraction;
    data["test_fraction"] = this->data.test_fraction;
  } else {
    data["root"] = this->data.root;
    data["subset"] = this->data.subset ? structure_name(*this->data.subset) : "all";
    data["naming"] = {{"deck_dir", this->data.naming.deck_dir},
                      {"wall_dir", this->data.naming.wall_dir},
                      {"pavement_dir", this->data.naming.pavement_dir},
                      {"cracked_prefix", this->data.naming.cracked_prefix},
                      {"uncracked_prefix", this->data.naming.uncracked_prefix}};
  }
  doc["data"] = std::move(data);
  doc["preprocess"] = {{"target_side", preprocess.target_side},
                       {"grayscale", preprocess.grayscale},
                       {"normalization", preprocess.normalization}};
  doc["structure"] = {{"theta_G", structure.theta_G},
                      {"theta_A", structure.theta_A},
                      {"theta_L1", structure.theta_L1},
                      {"theta_L2", structure.theta_L2},
                      {"max_hidden", structure.max_hidden},
                      {"max_layers", structure.max_layers},
                      {"warmup_epochs", structure.warmup_epochs},
                      {"cooldown_epochs", structure.cooldown_epochs},
                      {"noise_sigma", structure.noise_sigma},
                      {"wd_window", structure.wd_window},
                      {"scale_layer_thresholds", structure.scale_layer_thresholds},
                      {"wd_stop_epsilon", structure.wd_stop_epsilon},
                      {"annihilation", structure.annihilation}};
  doc["training"] = {{"epochs_per_layer", training.epochs_per_layer},
                     {"batch_size", training.batch_size},
                     {"learning_rate", training.learning_rate},
                     {"cd_k", training.cd_k},
                     {"momentum", training.momentum},
                     {"weight_decay", training.weight_decay},
                     {"initial_hidden", training.initial_hidden},
                     {"init_sigma", training.init_sigma},
                     {"data_mean_visible_bias", training.data_mean_visible_bias},
                     {"head_epochs", training.head_epochs},
                     {"head_learning_rate", training.head_learning_rate},
                     {"fine_tune", training.fine_tune},
                     {"adaptive", training.adaptive}};
  return doc;
}

DbnTrainOptions RunConfig::trainer_options() const {
  DbnTrainOptions options;
  options.rbm.epochs = training.epochs_per_layer;
  options.rbm.batch_size = training.batch_size;
  options.rbm.cd.k = training.cd_k;
  options.rbm.cd.learning_rate = training.learning_rate;
  options.rbm.cd.momentum = training.momentum;
  options.rbm.cd.weight_decay = training.weight_decay;
  options.rbm.adaptive = training.adaptive;
  options.initial_hidden = training.initial_hidden;
  options.init_sigma = training.init_sigma;
  options.data_mean_visible_bias = training.data_mean_visible_bias;
  options.head_epochs = training.head_epochs;
  options.head_learning_rate = training.head_learning_rate;
  options.head_batch_size = training.batch_size;
  return options;
}

}  // namespace adbn
