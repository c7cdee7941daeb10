#pragma once

#include <Eigen/Dense>
#include <utility>

#include "adbn/errors.hpp"
#include "adbn/rng.hpp"

namespace adbn {

/// Bernoulli-Bernoulli RBM parameters: visible bias b (length I), hidden
/// bias c (length J), weights W (I x J) with W(i, j) connecting v_i to h_j.
struct RbmParameters {
  Eigen::VectorXd visible_bias;
  Eigen::VectorXd hidden_bias;
  Eigen::MatrixXd weights;

  Eigen::Index visible_size() const { return visible_bias.size(); }
  Eigen::Index hidden_size() const { return hidden_bias.size(); }

  bool all_finite() const;

  static RbmParameters zeros(Eigen::Index visible, Eigen::Index hidden);
  /// Weights drawn N(0, sigma^2), biases zero.
  static RbmParameters random_init(Eigen::Index visible, Eigen::Index hidden, double sigma,
                                   Rng& rng);
};

/// Per-epoch training statistics consumed by the convergence monitor.
struct CdStats {
  int epoch = 0;
  double reconstruction_error = 0.0;
  /// Batch mean of the energy with hidden states sampled once per item.
  double mean_energy = 0.0;
  double grad_norm_c = 0.0;
  double grad_norm_W = 0.0;
};

/// Gradient of the mean log-likelihood w.r.t. {b, c, W}.
struct GradientTriple {
  Eigen::VectorXd d_visible_bias;
  Eigen::VectorXd d_hidden_bias;
  Eigen::MatrixXd d_weights;

  static GradientTriple zeros(Eigen::Index visible, Eigen::Index hidden);
};

struct CdOptions {
  int k = 1;
  double learning_rate = 0.05;
  double momentum = 0.0;
  double weight_decay = 0.0;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// E(v, h) = -b.v - c.h - v'Wh.
double energy(const Eigen::VectorXd& v, const Eigen::VectorXd& h, const RbmParameters& params);

/// p(h_j = 1 | v) = sigmoid(c_j + sum_i W_ij v_i).
Eigen::VectorXd hidden_conditional(const Eigen::VectorXd& v, const RbmParameters& params);
/// p(v_i = 1 | h) = sigmoid(b_i + sum_j W_ij h_j).
Eigen::VectorXd visible_conditional(const Eigen::VectorXd& h, const RbmParameters& params);

// Batch variants; one sample per row.
Eigen::MatrixXd hidden_conditional(const Eigen::MatrixXd& batch, const RbmParameters& params);
Eigen::MatrixXd visible_conditional(const Eigen::MatrixXd& batch, const RbmParameters& params);

/// Mean over the batch of the per-pixel squared error of the one-step
/// mean-field reconstruction. Deterministic (no sampling).
double reconstruction_error(const RbmParameters& params, const Eigen::MatrixXd& batch);

/// Batch mean of energy(v, h) with h sampled once per item from p(h|v).
double mean_energy_sampled(const RbmParameters& params, const Eigen::MatrixXd& batch, Rng& rng);

/// One CD-k step over the batch. Positive phase uses mean-field hidden
/// probabilities; the negative chain uses sampled binary states except the
/// final hidden probabilities. Returns the updated parameters; the input is
/// untouched. `velocity`, when given, carries the momentum state across calls.
std::pair<RbmParameters, CdStats> cd_update(const RbmParameters& params,
                                            const Eigen::MatrixXd& batch,
                                            const CdOptions& options, Rng& rng,
                                            GradientTriple* velocity = nullptr);

}  // namespace adbn
