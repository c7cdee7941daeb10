#pragma once

#include <map>
#include <string>
#include <vector>

#include "adbn/dataset.hpp"
#include "adbn/rbm.hpp"
#include "adbn/structure.hpp"

namespace adbn {

/// Stack of greedily pretrained RBMs plus a softmax head. Layer l consumes
/// the hidden activations of layer l-1; the raw input feeds layer 0.
/// `overrides` maps a binarized top-layer pattern to a label and is
/// consulted before the softmax head when enabled.
struct DbnModel {
  std::vector<RbmParameters> layers;
  Eigen::MatrixXd head_weights;  // M x J_top
  Eigen::VectorXd head_bias;     // M
  std::vector<std::string> label_names;
  Eigen::Index input_dim = 0;
  std::map<std::string, int> overrides;

  Eigen::Index num_classes() const { return head_bias.size(); }
  Eigen::Index top_dim() const { return layers.empty() ? input_dim : layers.back().hidden_size(); }

  void check_consistent() const;

  static DbnModel create(Eigen::Index input_dim, Eigen::Index initial_hidden,
                         std::vector<std::string> label_names, Rng& rng);
};

/// Mean-field activations h^1 .. h^L for one input.
std::vector<Eigen::VectorXd> propagate(const DbnModel& model, const Eigen::VectorXd& v);

/// Top-layer activations; batch variant feeds one sample per row.
Eigen::VectorXd top_features(const DbnModel& model, const Eigen::VectorXd& v);
Eigen::MatrixXd top_features(const DbnModel& model, const Eigen::MatrixXd& batch);

/// Softmax class probabilities (max-subtraction stabilized).
Eigen::VectorXd classify(const DbnModel& model, const Eigen::VectorXd& v);

/// Binarize activations at 0.5 into a '0'/'1' pattern key.
std::string activation_pattern(const Eigen::VectorXd& features);

struct Prediction {
  int label = 0;
  Eigen::VectorXd probabilities;
  bool override_fired = false;
};

Prediction predict(const DbnModel& model, const Eigen::VectorXd& v, bool use_overrides);

/// Mini-batch cross-entropy descent on the head over the frozen stack's
/// top-layer features.
DbnModel train_head(const DbnModel& model, const LabeledDataset& train, int epochs,
                    double learning_rate, int batch_size, Rng& rng);

/// Final per-layer walking-distance totals and energy magnitudes of the
/// stack trained so far.
struct LayerStats {
  std::vector<double> wd_total;
  std::vector<double> energy_magnitude;

  std::size_t layer_count() const { return wd_total.size(); }
};

/// True when both stack sums stay above their thresholds and the layer cap
/// leaves room: sum WD^l > theta_L1 and sum E^l > theta_L2 (AND).
bool check_layer_generation(const LayerStats& stats, const StructureConfig& config);

/// Fresh RBM on top (I = current top width); the head is re-initialized to
/// zeros for the new top dimension and must be retrained.
DbnModel append_layer(const DbnModel& model, Eigen::Index initial_hidden, Rng& rng);

struct DbnTrainOptions {
  RbmTrainOptions rbm;
  int initial_hidden = 8;
  double init_sigma = 0.01;
  // Start each layer's visible bias at the log-odds of its input means, so
  // the weights model structure instead of absorbing pixel intensity.
  // Zero-bias starts saturate every hidden unit on bright image data.
  bool data_mean_visible_bias = true;
  int head_epochs = 200;
  double head_learning_rate = 0.1;
  int head_batch_size = 64;
};

struct AdaptiveTrainResult {
  DbnModel model;
  std::vector<CdStats> epoch_stats;       // layer index in parallel array below
  std::vector<int> epoch_layer;
  std::vector<int> epoch_hidden_count;
  std::vector<double> epoch_wd_total;
  std::vector<StructuralEvent> events;
  LayerStats stats;
};

/// Raised when training hits non-finite values; carries the last state that
/// was still finite so the caller can persist it.
class TrainAbortedError : public NumericError {
 public:
  TrainAbortedError(const std::string& what, AdaptiveTrainResult partial)
      : NumericError(what), partial_(std::move(partial)) {}
  const AdaptiveTrainResult& partial() const { return partial_; }

 private:
  AdaptiveTrainResult partial_;
};

/// Greedy layer-wise pretraining with the structural controller per layer,
/// automatic layer appends while check_layer_generation holds, then head
/// training. Deterministic given the engine seed.
AdaptiveTrainResult train_adaptive(const LabeledDataset& train, const DbnTrainOptions& options,
                                   const StructureConfig& config, Rng& rng);

/// Pattern-frequency patch: binarized top-layer patterns that the head
/// misclassifies are routed to their majority training label via the
/// override table. Never increases the training misclassification count.
DbnModel fine_tune(const DbnModel& model, const LabeledDataset& train);

struct CategoryResult {
  std::string name;
  std::size_t total = 0;
  std::size_t incorrect = 0;
  double accuracy() const {
    return total == 0 ? 1.0 : 1.0 - static_cast<double>(incorrect) / static_cast<double>(total);
  }
};

struct EvalReport {
  std::vector<CategoryResult> categories;
  Eigen::MatrixXi confusion;  // rows: true label, cols: predicted
  std::size_t total = 0;
  std::size_t incorrect = 0;

  double accuracy() const {
    return total == 0 ? 1.0 : 1.0 - static_cast<double>(incorrect) / static_cast<double>(total);
  }
  std::string to_text() const;
};

EvalReport evaluate(const DbnModel& model, const LabeledDataset& data, bool use_overrides);

std::size_t count_misclassified(const DbnModel& model, const LabeledDataset& data,
                                bool use_overrides);

}  // namespace adbn
