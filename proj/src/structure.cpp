#include "adbn/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace adbn {

WdSnapshot walking_distance(const RbmParameters& prev, const RbmParameters& curr, int epoch) {
  if (prev.visible_size() != curr.visible_size() || prev.hidden_size() != curr.hidden_size()) {
    throw ShapeError("walking_distance: parameter shapes differ (" +
                     std::to_string(prev.visible_size()) + "x" + std::to_string(prev.hidden_size()) +
                     " vs " + std::to_string(curr.visible_size()) + "x" +
                     std::to_string(curr.hidden_size()) + "); reset the trace after structural edits");
  }
  WdSnapshot snap;
  snap.epoch = epoch;
  snap.wd_hidden_bias = (curr.hidden_bias - prev.hidden_bias).cwiseAbs();
  snap.wd_weights = (curr.weights - prev.weights).colwise().norm().transpose();
  snap.wd_total = snap.wd_hidden_bias.sum() + snap.wd_weights.sum();
  if (!std::isfinite(snap.wd_total)) {
    throw NumericError("non-finite walking distance in weights or hidden_bias");
  }
  return snap;
}

WdTrace::WdTrace(int window) : window_(window) {
  if (window < 1) throw ConfigError("wd_window", "must be >= 1");
}

void WdTrace::push(WdSnapshot snapshot) {
  if (!snapshots_.empty() &&
      snapshots_.back().wd_hidden_bias.size() != snapshot.wd_hidden_bias.size()) {
    throw ShapeError("WdTrace: snapshot width changed; reset the trace after structural edits");
  }
  snapshots_.push_back(std::move(snapshot));
}

void WdTrace::reset() { snapshots_.clear(); }

Eigen::VectorXd WdTrace::smoothed_c() const {
  if (snapshots_.empty()) return Eigen::VectorXd();
  const std::size_t n = std::min<std::size_t>(snapshots_.size(), static_cast<std::size_t>(window_));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(snapshots_.back().wd_hidden_bias.size());
  for (std::size_t i = snapshots_.size() - n; i < snapshots_.size(); ++i) {
    sum += snapshots_[i].wd_hidden_bias;
  }
  return sum / static_cast<double>(n);
}

Eigen::VectorXd WdTrace::smoothed_W() const {
  if (snapshots_.empty()) return Eigen::VectorXd();
  const std::size_t n = std::min<std::size_t>(snapshots_.size(), static_cast<std::size_t>(window_));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(snapshots_.back().wd_weights.size());
  for (std::size_t i = snapshots_.size() - n; i < snapshots_.size(); ++i) {
    sum += snapshots_[i].wd_weights;
  }
  return sum / static_cast<double>(n);
}

double WdTrace::smoothed_total() const {
  if (snapshots_.empty()) return 0.0;
  return smoothed_c().sum() + smoothed_W().sum();
}

void StructureConfig::validate(Eigen::Index initial_hidden) const {
  if (!(theta_G > 0.0)) throw ConfigError("theta_G", "must be > 0");
  if (!(theta_A > 0.0)) throw ConfigError("theta_A", "must be > 0");
  if (!(theta_L1 > 0.0)) throw ConfigError("theta_L1", "must be > 0");
  if (!(theta_L2 > 0.0)) throw ConfigError("theta_L2", "must be > 0");
  if (max_hidden < initial_hidden) throw ConfigError("max_hidden", "must be >= initial hidden count");
  if (max_layers < 1) throw ConfigError("max_layers", "must be >= 1");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs", "must be >= 0");
  if (cooldown_epochs < 0) throw ConfigError("cooldown_epochs", "must be >= 0");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma", "must be >= 0");
  if (wd_window < 1) throw ConfigError("wd_window", "must be >= 1");
  if (wd_stop_epsilon < 0.0) throw ConfigError("wd_stop_epsilon", "must be >= 0");
}

std::vector<Eigen::Index> check_generation(const WdTrace& trace, const RbmParameters& params,
                                           const StructureConfig& config) {
  const Eigen::Index hidden = params.hidden_size();
  const Eigen::Index room = static_cast<Eigen::Index>(config.max_hidden) - hidden;
  if (room <= 0) return {};
  if (trace.size() < static_cast<std::size_t>(trace.window())) return {};

  const Eigen::VectorXd smoothed_c = trace.smoothed_c();
  const Eigen::VectorXd smoothed_W = trace.smoothed_W();
  std::vector<std::pair<double, Eigen::Index>> triggered;
  for (Eigen::Index j = 0; j < hidden; ++j) {
    const double product = smoothed_c(j) * smoothed_W(j);
    if (product > config.theta_G) triggered.emplace_back(product, j);
  }
  // Keep the most unsettled parents when the cap truncates the set.
  std::sort(triggered.begin(), triggered.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  if (static_cast<Eigen::Index>(triggered.size()) > room) triggered.resize(room);

  std::vector<Eigen::Index> parents;
  parents.reserve(triggered.size());
  for (const auto& entry : triggered) parents.push_back(entry.second);
  std::sort(parents.begin(), parents.end());
  return parents;
}

RbmParameters generate_neuron(const RbmParameters& params, Eigen::Index parent,
                              double noise_sigma, Rng& rng) {
  const Eigen::Index visible = params.visible_size();
  const Eigen::Index hidden = params.hidden_size();
  if (parent < 0 || parent >= hidden) {
    throw ShapeError("generate_neuron: parent index " + std::to_string(parent) +
                     " out of range for " + std::to_string(hidden) + " hidden neurons");
  }
  RbmParameters out;
  out.visible_bias = params.visible_bias;
  out.hidden_bias = Eigen::VectorXd(hidden + 1);
  out.hidden_bias.head(hidden) = params.hidden_bias;
  out.hidden_bias(hidden) = params.hidden_bias(parent);
  out.weights = Eigen::MatrixXd(visible, hidden + 1);
  out.weights.leftCols(hidden) = params.weights;
  Eigen::VectorXd column = params.weights.col(parent);
  for (Eigen::Index i = 0; i < visible; ++i) column(i) += normal_draw(rng, 0.0, noise_sigma);
  out.weights.col(hidden) = column;
  return out;
}

std::vector<Eigen::Index> check_annihilation(const RbmParameters& params,
                                             const Eigen::MatrixXd& data,
                                             const StructureConfig& config) {
  if (data.rows() == 0) throw DatasetError("check_annihilation: empty data");
  const Eigen::Index hidden = params.hidden_size();
  if (hidden < 2) return {};

  const Eigen::MatrixXd activations = hidden_conditional(data, params);
  const Eigen::RowVectorXd means = activations.colwise().mean();
  Eigen::VectorXd spread(hidden);
  for (Eigen::Index j = 0; j < hidden; ++j) {
    spread(j) = std::sqrt((activations.col(j).array() - means(j)).square().mean());
  }

  std::vector<Eigen::Index> victims;
  for (Eigen::Index j = 0; j < hidden; ++j) {
    if (spread(j) < config.theta_A) victims.push_back(j);
  }
  if (static_cast<Eigen::Index>(victims.size()) == hidden) {
    // Survivor rule: spare the neuron with the widest activation spread.
    Eigen::Index keep = 0;
    spread.maxCoeff(&keep);
    victims.erase(std::remove(victims.begin(), victims.end(), keep), victims.end());
  }
  return victims;
}

RbmParameters annihilate(const RbmParameters& params, const std::vector<Eigen::Index>& victims) {
  if (victims.empty()) return params;
  const Eigen::Index hidden = params.hidden_size();
  std::set<Eigen::Index> victim_set;
  for (Eigen::Index j : victims) {
    if (j < 0 || j >= hidden) {
      throw ShapeError("annihilate: victim index " + std::to_string(j) + " out of range for " +
                       std::to_string(hidden) + " hidden neurons");
    }
    victim_set.insert(j);
  }
  if (static_cast<Eigen::Index>(victim_set.size()) >= hidden) {
    throw ShapeError("annihilate: cannot remove all hidden neurons");
  }

  const Eigen::Index survivors = hidden - static_cast<Eigen::Index>(victim_set.size());
  RbmParameters out;
  out.visible_bias = params.visible_bias;
  out.hidden_bias = Eigen::VectorXd(survivors);
  out.weights = Eigen::MatrixXd(params.visible_size(), survivors);
  Eigen::Index next = 0;
  for (Eigen::Index j = 0; j < hidden; ++j) {
    if (victim_set.count(j)) continue;
    out.hidden_bias(next) = params.hidden_bias(j);
    out.weights.col(next) = params.weights.col(j);
    ++next;
  }
  return out;
}

const char* StructuralEvent::kind_name(Kind kind) {
  switch (kind) {
    case Kind::Generate: return "generate";
    case Kind::Annihilate: return "annihilate";
    case Kind::Layer: return "layer";
  }
  return "unknown";
}

RbmTrainResult train_rbm_adaptive(RbmParameters params, const Eigen::MatrixXd& data,
                                  const RbmTrainOptions& options, const StructureConfig& config,
                                  Rng& rng, int layer_index) {
  if (data.rows() == 0) throw DatasetError("train_rbm_adaptive: empty dataset");
  if (options.epochs < 1) throw ConfigError("epochs_per_layer", "must be >= 1");
  if (options.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");

  RbmTrainResult result;
  WdTrace trace(config.wd_window);
  GradientTriple velocity = GradientTriple::zeros(params.visible_size(), params.hidden_size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), 0);

  bool generated_once = false;
  int last_event_epoch = std::numeric_limits<int>::min() / 2;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const RbmParameters epoch_start = params;
    shuffle_indices(order, rng);

    for (Eigen::Index begin = 0; begin < data.rows();
         begin += static_cast<Eigen::Index>(options.batch_size)) {
      const Eigen::Index count =
          std::min<Eigen::Index>(options.batch_size, data.rows() - begin);
      Eigen::MatrixXd batch(count, data.cols());
      for (Eigen::Index r = 0; r < count; ++r) batch.row(r) = data.row(order[begin + r]);
      auto [updated, stats] = cd_update(params, batch, options.cd, rng, &velocity);
      params = std::move(updated);
      (void)stats;
    }

    WdSnapshot snap = walking_distance(epoch_start, params, epoch);
    trace.push(snap);

    CdStats epoch_stats;
    epoch_stats.epoch = epoch;
    epoch_stats.reconstruction_error = reconstruction_error(params, data);
    epoch_stats.mean_energy = mean_energy_sampled(params, data, rng);
    result.epoch_stats.push_back(epoch_stats);
    result.epoch_wd.push_back(snap.wd_total);
    result.epoch_hidden.push_back(static_cast<int>(params.hidden_size()));
    result.final_wd_total = snap.wd_total;
    result.final_mean_energy = epoch_stats.mean_energy;
    result.epochs_run = epoch;

    const bool past_warmup = epoch >= config.warmup_epochs;
    const bool past_cooldown = epoch - last_event_epoch >= config.cooldown_epochs;
    if (options.adaptive && past_warmup && past_cooldown) {
      const std::vector<Eigen::Index> parents = check_generation(trace, params, config);
      if (!parents.empty()) {
        for (Eigen::Index parent : parents) {
          params = generate_neuron(params, parent, config.noise_sigma, rng);
          result.events.push_back({StructuralEvent::Kind::Generate, epoch, layer_index,
                                   static_cast<int>(parent)});
        }
        trace.reset();
        velocity = GradientTriple::zeros(params.visible_size(), params.hidden_size());
        last_event_epoch = epoch;
        generated_once = true;
      } else if (config.annihilation && generated_once && params.hidden_size() >= 2) {
        const std::vector<Eigen::Index> victims = check_annihilation(params, data, config);
        if (!victims.empty()) {
          params = annihilate(params, victims);
          result.events.push_back({StructuralEvent::Kind::Annihilate, epoch, layer_index,
                                   static_cast<int>(victims.size())});
          trace.reset();
          velocity = GradientTriple::zeros(params.visible_size(), params.hidden_size());
          last_event_epoch = epoch;
        }
      }
    }

    if (config.wd_stop_epsilon > 0.0 && past_warmup &&
        trace.size() >= static_cast<std::size_t>(trace.window()) &&
        trace.smoothed_total() < config.wd_stop_epsilon) {
      break;
    }
  }

  result.params = std::move(params);
  return result;
}

}  // namespace adbn
