#include "adbn/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace adbn {

void DbnModel::check_consistent() const {
  if (layers.empty()) throw ShapeError("DbnModel: needs at least one layer");
  if (layers.front().visible_size() != input_dim) {
    throw ShapeError("DbnModel: first layer expects " +
                     std::to_string(layers.front().visible_size()) + " inputs, input_dim is " +
                     std::to_string(input_dim));
  }
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l].visible_size() != layers[l - 1].hidden_size()) {
      throw ShapeError("DbnModel: layer " + std::to_string(l) + " visible size " +
                       std::to_string(layers[l].visible_size()) + " does not chain to layer " +
                       std::to_string(l - 1) + " hidden size " +
                       std::to_string(layers[l - 1].hidden_size()));
    }
  }
  if (head_weights.cols() != layers.back().hidden_size()) {
    throw ShapeError("DbnModel: head expects " + std::to_string(head_weights.cols()) +
                     " features, top layer provides " +
                     std::to_string(layers.back().hidden_size()));
  }
  if (head_weights.rows() != head_bias.size() ||
      head_bias.size() != static_cast<Eigen::Index>(label_names.size())) {
    throw ShapeError("DbnModel: head output dimension does not match label names");
  }
  if (head_bias.size() < 2) throw ShapeError("DbnModel: needs at least two classes");
}

DbnModel DbnModel::create(Eigen::Index input_dim, Eigen::Index initial_hidden,
                          std::vector<std::string> label_names, Rng& rng) {
  DbnModel model;
  model.input_dim = input_dim;
  model.label_names = std::move(label_names);
  model.layers.push_back(RbmParameters::random_init(input_dim, initial_hidden, 0.01, rng));
  const auto classes = static_cast<Eigen::Index>(model.label_names.size());
  model.head_weights = Eigen::MatrixXd::Zero(classes, initial_hidden);
  model.head_bias = Eigen::VectorXd::Zero(classes);
  model.check_consistent();
  return model;
}

std::vector<Eigen::VectorXd> propagate(const DbnModel& model, const Eigen::VectorXd& v) {
  if (v.size() != model.input_dim) {
    throw ShapeError("propagate: input size " + std::to_string(v.size()) +
                     " does not match model input_dim " + std::to_string(model.input_dim));
  }
  std::vector<Eigen::VectorXd> activations;
  activations.reserve(model.layers.size());
  Eigen::VectorXd current = v;
  for (const auto& layer : model.layers) {
    current = hidden_conditional(current, layer);
    activations.push_back(current);
  }
  return activations;
}

Eigen::VectorXd top_features(const DbnModel& model, const Eigen::VectorXd& v) {
  return propagate(model, v).back();
}

Eigen::MatrixXd top_features(const DbnModel& model, const Eigen::MatrixXd& batch) {
  Eigen::MatrixXd current = batch;
  for (const auto& layer : model.layers) current = hidden_conditional(current, layer);
  return current;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double peak = logits.maxCoeff();
  Eigen::VectorXd shifted = (logits.array() - peak).exp();
  return shifted / shifted.sum();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.row(r) = softmax(logits.row(r).transpose()).transpose();
  }
  return out;
}

}  // namespace

Eigen::VectorXd classify(const DbnModel& model, const Eigen::VectorXd& v) {
  const Eigen::VectorXd features = top_features(model, v);
  return softmax(model.head_weights * features + model.head_bias);
}

std::string activation_pattern(const Eigen::VectorXd& features) {
  std::string pattern(static_cast<std::size_t>(features.size()), '0');
  for (Eigen::Index j = 0; j < features.size(); ++j) {
    if (features(j) >= 0.5) pattern[static_cast<std::size_t>(j)] = '1';
  }
  return pattern;
}

Prediction predict(const DbnModel& model, const Eigen::VectorXd& v, bool use_overrides) {
  const Eigen::VectorXd features = top_features(model, v);
  Prediction prediction;
  prediction.probabilities = softmax(model.head_weights * features + model.head_bias);
  if (use_overrides && !model.overrides.empty()) {
    const auto it = model.overrides.find(activation_pattern(features));
    if (it != model.overrides.end()) {
      prediction.label = it->second;
      prediction.override_fired = true;
      return prediction;
    }
  }
  Eigen::Index best = 0;
  prediction.probabilities.maxCoeff(&best);
  prediction.label = static_cast<int>(best);
  return prediction;
}

DbnModel train_head(const DbnModel& model, const LabeledDataset& train, int epochs,
                    double learning_rate, int batch_size, Rng& rng) {
  if (train.empty()) throw DatasetError("train_head: empty dataset");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  const Eigen::Index classes = model.num_classes();
  for (const auto& sample : train.samples) {
    if (sample.label < 0 || sample.label >= classes) {
      throw DatasetError("train_head: label " + std::to_string(sample.label) +
                         " out of range for " + std::to_string(classes) + " classes (" +
                         sample.source + ")");
    }
  }

  const Eigen::MatrixXd features = top_features(model, data_matrix(train));
  const std::vector<int> labels = label_vector(train);
  const Eigen::Index n = features.rows();

  DbnModel out = model;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (Eigen::Index begin = 0; begin < n; begin += batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - begin);
      Eigen::MatrixXd x(count, features.cols());
      Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(count, classes);
      for (Eigen::Index r = 0; r < count; ++r) {
        const Eigen::Index at = order[static_cast<std::size_t>(begin + r)];
        x.row(r) = features.row(at);
        onehot(r, labels[static_cast<std::size_t>(at)]) = 1.0;
      }
      const Eigen::MatrixXd logits =
          (x * out.head_weights.transpose()).rowwise() + out.head_bias.transpose();
      const Eigen::MatrixXd delta = softmax_rows(logits) - onehot;  // d(loss)/d(logits)
      const double scale = learning_rate / static_cast<double>(count);
      out.head_weights -= scale * (delta.transpose() * x);
      out.head_bias -= scale * delta.colwise().sum().transpose();
    }
  }
  if (!out.head_weights.allFinite() || !out.head_bias.allFinite()) {
    throw NumericError("non-finite update in head");
  }
  return out;
}

bool check_layer_generation(const LayerStats& stats, const StructureConfig& config) {
  const auto k = static_cast<int>(stats.layer_count());
  if (k >= config.max_layers) return false;
  const double scale = config.scale_layer_thresholds ? static_cast<double>(k) : 1.0;
  const double wd_sum = std::accumulate(stats.wd_total.begin(), stats.wd_total.end(), 0.0);
  const double energy_sum =
      std::accumulate(stats.energy_magnitude.begin(), stats.energy_magnitude.end(), 0.0);
  return wd_sum > config.theta_L1 * scale && energy_sum > config.theta_L2 * scale;
}

DbnModel append_layer(const DbnModel& model, Eigen::Index initial_hidden, Rng& rng) {
  if (initial_hidden < 1) throw ConfigError("initial_hidden", "must be >= 1");
  DbnModel out = model;
  const Eigen::Index top = model.top_dim();
  out.layers.push_back(RbmParameters::random_init(top, initial_hidden, 0.01, rng));
  out.head_weights = Eigen::MatrixXd::Zero(model.num_classes(), initial_hidden);
  out.head_bias = Eigen::VectorXd::Zero(model.num_classes());
  out.overrides.clear();  // patterns keyed to the old top layer are void
  return out;
}

AdaptiveTrainResult train_adaptive(const LabeledDataset& train, const DbnTrainOptions& options,
                                   const StructureConfig& config, Rng& rng) {
  if (train.empty()) throw DatasetError("train_adaptive: empty dataset");
  config.validate(options.initial_hidden);

  AdaptiveTrainResult result;
  result.model.input_dim = data_matrix(train).cols();
  result.model.label_names = train.label_names;

  Eigen::MatrixXd inputs = data_matrix(train);

  while (true) {
    const int layer_index = static_cast<int>(result.model.layers.size());
    RbmParameters layer =
        RbmParameters::random_init(inputs.cols(), options.initial_hidden, options.init_sigma, rng);
    if (options.data_mean_visible_bias) {
      const Eigen::VectorXd mean = inputs.colwise().mean();
      for (Eigen::Index i = 0; i < mean.size(); ++i) {
        const double p = std::clamp(mean(i), 0.01, 0.99);
        layer.visible_bias(i) = std::log(p / (1.0 - p));
      }
    }
    RbmTrainResult trained;
    try {
      trained = train_rbm_adaptive(std::move(layer), inputs, options.rbm, config, rng, layer_index);
    } catch (const NumericError& e) {
      throw TrainAbortedError(std::string(e.what()) + " (layer " + std::to_string(layer_index) + ")",
                              std::move(result));
    }

    result.model.layers.push_back(trained.params);
    result.stats.wd_total.push_back(trained.final_wd_total);
    result.stats.energy_magnitude.push_back(std::abs(trained.final_mean_energy));
    for (std::size_t e = 0; e < trained.epoch_stats.size(); ++e) {
      result.epoch_stats.push_back(trained.epoch_stats[e]);
      result.epoch_layer.push_back(layer_index);
      result.epoch_hidden_count.push_back(trained.epoch_hidden[e]);
      result.epoch_wd_total.push_back(trained.epoch_wd[e]);
    }
    for (const auto& event : trained.events) result.events.push_back(event);

    if (check_layer_generation(result.stats, config)) {
      result.events.push_back({StructuralEvent::Kind::Layer, trained.epochs_run,
                               layer_index + 1, options.initial_hidden});
      inputs = hidden_conditional(inputs, trained.params);
      continue;
    }
    break;
  }

  const auto classes = static_cast<Eigen::Index>(train.label_names.size());
  result.model.head_weights = Eigen::MatrixXd::Zero(classes, result.model.top_dim());
  result.model.head_bias = Eigen::VectorXd::Zero(classes);
  result.model.check_consistent();
  result.model = train_head(result.model, train, options.head_epochs, options.head_learning_rate,
                            options.head_batch_size, rng);
  return result;
}

DbnModel fine_tune(const DbnModel& model, const LabeledDataset& train) {
  struct PatternTally {
    std::unordered_map<int, std::size_t> label_counts;
    std::size_t correct_plain = 0;
  };
  std::unordered_map<std::string, PatternTally> tallies;

  for (const auto& sample : train.samples) {
    const Eigen::VectorXd features = top_features(model, sample.pixels);
    const Eigen::VectorXd probs = softmax(model.head_weights * features + model.head_bias);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    auto& tally = tallies[activation_pattern(features)];
    ++tally.label_counts[sample.label];
    if (static_cast<int>(best) == sample.label) ++tally.correct_plain;
  }

  DbnModel out = model;
  out.overrides.clear();
  for (const auto& [pattern, tally] : tallies) {
    int majority = -1;
    std::size_t majority_count = 0;
    bool tied = false;
    for (const auto& [label, count] : tally.label_counts) {
      if (count > majority_count) {
        majority = label;
        majority_count = count;
        tied = false;
      } else if (count == majority_count) {
        tied = true;
      }
    }
    // Tie: keep the head's output. Otherwise patch only when the override
    // strictly beats the plain head on this pattern's training samples.
    if (!tied && majority_count > tally.correct_plain) {
      out.overrides[pattern] = majority;
    }
  }
  return out;
}

EvalReport evaluate(const DbnModel& model, const LabeledDataset& data, bool use_overrides) {
  if (data.empty()) throw DatasetError("evaluate: empty dataset");
  const auto classes = static_cast<Eigen::Index>(model.label_names.size());
  EvalReport report;
  report.confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (Eigen::Index k = 0; k < classes; ++k) {
    report.categories.push_back({model.label_names[static_cast<std::size_t>(k)], 0, 0});
  }

  for (const auto& sample : data.samples) {
    if (sample.label < 0 || sample.label >= classes) {
      throw DatasetError("evaluate: label " + std::to_string(sample.label) + " out of range");
    }
    const Prediction prediction = predict(model, sample.pixels, use_overrides);
    report.confusion(sample.label, prediction.label) += 1;
    auto& category = report.categories[static_cast<std::size_t>(sample.label)];
    ++category.total;
    ++report.total;
    if (prediction.label != sample.label) {
      ++category.incorrect;
      ++report.incorrect;
    }
  }
  return report;
}

std::size_t count_misclassified(const DbnModel& model, const LabeledDataset& data,
                                bool use_overrides) {
  std::size_t wrong = 0;
  for (const auto& sample : data.samples) {
    if (predict(model, sample.pixels, use_overrides).label != sample.label) ++wrong;
  }
  return wrong;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  std::size_t width = 8;
  for (const auto& category : categories) width = std::max(width, category.name.size());
  out << std::left << std::setw(static_cast<int>(width) + 2) << "Category"
      << "Accuracy (incorrect/total)\n";
  auto line = [&](const std::string& name, double accuracy, std::size_t incorrect,
                  std::size_t total) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(1) << accuracy * 100.0 << "% (" << incorrect << "/"
         << total << ")";
    out << std::left << std::setw(static_cast<int>(width) + 2) << name << cell.str() << "\n";
  };
  for (const auto& category : categories) {
    line(category.name, category.accuracy(), category.incorrect, category.total);
  }
  line("overall", accuracy(), incorrect, total);
  return out.str();
}

}  // namespace adbn
