#pragma once

#include <deque>
#include <vector>

#include "adbn/rbm.hpp"

namespace adbn {

/// Per-epoch parameter-change magnitudes: |delta c_j| and the Euclidean norm
/// of the j-th weight-column change. The visible bias is deliberately
/// excluded; it tracks the input data rather than learning convergence.
struct WdSnapshot {
  int epoch = 0;
  Eigen::VectorXd wd_hidden_bias;
  Eigen::VectorXd wd_weights;
  double wd_total = 0.0;
};

WdSnapshot walking_distance(const RbmParameters& prev, const RbmParameters& curr, int epoch = 0);

/// Ordered history of snapshots with per-neuron moving averages over the
/// last `window` entries. Must be reset after any structural edit.
class WdTrace {
 public:
  explicit WdTrace(int window = 5);

  void push(WdSnapshot snapshot);
  void reset();

  int window() const { return window_; }
  std::size_t size() const { return snapshots_.size(); }
  const std::deque<WdSnapshot>& snapshots() const { return snapshots_; }

  Eigen::VectorXd smoothed_c() const;
  Eigen::VectorXd smoothed_W() const;
  double smoothed_total() const;

 private:
  int window_;
  std::deque<WdSnapshot> snapshots_;
};

/// Structural thresholds and scheduling knobs.
struct StructureConfig {
  double theta_G = 0.05;   // neuron generation: smoothed_c * smoothed_W product
  double theta_A = 0.01;   // neuron annihilation: activation spread
  double theta_L1 = 0.1;   // layer generation: stack WD sum
  double theta_L2 = 0.1;   // layer generation: stack energy sum
  int max_hidden = 64;
  int max_layers = 5;
  int warmup_epochs = 10;
  int cooldown_epochs = 5;
  double noise_sigma = 0.01;
  int wd_window = 5;
  // Layer thresholds grow with the current depth k when set.
  bool scale_layer_thresholds = true;
  // Early stop for a layer once the smoothed total WD falls below this;
  // 0 disables and the layer always runs its full epoch budget.
  double wd_stop_epsilon = 0.0;
  bool annihilation = true;

  void validate(Eigen::Index initial_hidden = 1) const;
};

/// Parent indices whose smoothed WD product exceeds theta_G, capped so the
/// layer never exceeds max_hidden. Empty when the trace is shorter than its
/// window or the cap is already reached.
std::vector<Eigen::Index> check_generation(const WdTrace& trace, const RbmParameters& params,
                                           const StructureConfig& config);

/// Insert one hidden neuron next to `parent`: the new column is the parent
/// column plus N(0, noise_sigma^2) noise, the new bias copies the parent's.
/// Every pre-existing entry is preserved bit-for-bit.
RbmParameters generate_neuron(const RbmParameters& params, Eigen::Index parent,
                              double noise_sigma, Rng& rng);

/// Neurons whose activation standard deviation over `data` falls below
/// theta_A. At least one neuron always survives.
std::vector<Eigen::Index> check_annihilation(const RbmParameters& params,
                                             const Eigen::MatrixXd& data,
                                             const StructureConfig& config);

/// Remove the given hidden neurons; surviving columns keep their order.
RbmParameters annihilate(const RbmParameters& params, const std::vector<Eigen::Index>& victims);

struct StructuralEvent {
  enum class Kind { Generate, Annihilate, Layer };
  Kind kind = Kind::Generate;
  int epoch = 0;
  int layer = 0;
  int detail = 0;  // parent index, victim count, or new-layer width

  static const char* kind_name(Kind kind);
};

struct RbmTrainOptions {
  int epochs = 100;
  int batch_size = 64;
  CdOptions cd;
  bool adaptive = true;  // run the generation/annihilation controller
};

struct RbmTrainResult {
  RbmParameters params;
  std::vector<CdStats> epoch_stats;
  std::vector<double> epoch_wd;    // wd_total per epoch, parallel to epoch_stats
  std::vector<int> epoch_hidden;   // hidden width while the epoch ran
  std::vector<StructuralEvent> events;
  double final_wd_total = 0.0;
  double final_mean_energy = 0.0;
  int epochs_run = 0;
};

/// Epoch loop for one RBM: minibatch CD plus the end-of-epoch structural
/// controller (generation first; annihilation only once some generation has
/// happened in this layer). `data` is one sample per row.
RbmTrainResult train_rbm_adaptive(RbmParameters params, const Eigen::MatrixXd& data,
                                  const RbmTrainOptions& options, const StructureConfig& config,
                                  Rng& rng, int layer_index = 0);

}  // namespace adbn
