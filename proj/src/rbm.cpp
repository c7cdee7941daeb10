#include "adbn/rbm.hpp"

#include <string>

namespace adbn {

namespace {

void check_vector(const Eigen::VectorXd& x, Eigen::Index expected, const char* axis) {
  if (x.size() != expected) {
    throw ShapeError(std::string(axis) + " size " + std::to_string(x.size()) +
                     " does not match parameter dimension " + std::to_string(expected));
  }
}

void check_batch(const Eigen::MatrixXd& batch, Eigen::Index expected, const char* axis) {
  if (batch.cols() != expected) {
    throw ShapeError(std::string(axis) + " dimension " + std::to_string(batch.cols()) +
                     " does not match parameter dimension " + std::to_string(expected));
  }
}

Eigen::MatrixXd sample_bernoulli(const Eigen::MatrixXd& probabilities, Rng& rng) {
  Eigen::MatrixXd out(probabilities.rows(), probabilities.cols());
  for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
    for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
      out(r, c) = uniform_unit(rng) < probabilities(r, c) ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace

bool RbmParameters::all_finite() const {
  return visible_bias.allFinite() && hidden_bias.allFinite() && weights.allFinite();
}

RbmParameters RbmParameters::zeros(Eigen::Index visible, Eigen::Index hidden) {
  if (visible < 1 || hidden < 1) {
    throw ShapeError("RBM needs at least one visible and one hidden unit, got I=" +
                     std::to_string(visible) + " J=" + std::to_string(hidden));
  }
  RbmParameters p;
  p.visible_bias = Eigen::VectorXd::Zero(visible);
  p.hidden_bias = Eigen::VectorXd::Zero(hidden);
  p.weights = Eigen::MatrixXd::Zero(visible, hidden);
  return p;
}

RbmParameters RbmParameters::random_init(Eigen::Index visible, Eigen::Index hidden, double sigma,
                                         Rng& rng) {
  RbmParameters p = zeros(visible, hidden);
  for (Eigen::Index i = 0; i < visible; ++i) {
    for (Eigen::Index j = 0; j < hidden; ++j) {
      p.weights(i, j) = normal_draw(rng, 0.0, sigma);
    }
  }
  return p;
}

GradientTriple GradientTriple::zeros(Eigen::Index visible, Eigen::Index hidden) {
  GradientTriple g;
  g.d_visible_bias = Eigen::VectorXd::Zero(visible);
  g.d_hidden_bias = Eigen::VectorXd::Zero(hidden);
  g.d_weights = Eigen::MatrixXd::Zero(visible, hidden);
  return g;
}

double energy(const Eigen::VectorXd& v, const Eigen::VectorXd& h, const RbmParameters& params) {
  check_vector(v, params.visible_size(), "visible vector");
  check_vector(h, params.hidden_size(), "hidden vector");
  return -params.visible_bias.dot(v) - params.hidden_bias.dot(h) -
         v.dot(params.weights * h);
}

Eigen::VectorXd hidden_conditional(const Eigen::VectorXd& v, const RbmParameters& params) {
  check_vector(v, params.visible_size(), "visible vector");
  Eigen::VectorXd act = params.hidden_bias + params.weights.transpose() * v;
  return act.unaryExpr([](double x) { return sigmoid(x); });
}

Eigen::VectorXd visible_conditional(const Eigen::VectorXd& h, const RbmParameters& params) {
  check_vector(h, params.hidden_size(), "hidden vector");
  Eigen::VectorXd act = params.visible_bias + params.weights * h;
  return act.unaryExpr([](double x) { return sigmoid(x); });
}

Eigen::MatrixXd hidden_conditional(const Eigen::MatrixXd& batch, const RbmParameters& params) {
  check_batch(batch, params.visible_size(), "visible batch");
  Eigen::MatrixXd act = (batch * params.weights).rowwise() + params.hidden_bias.transpose();
  return act.unaryExpr([](double x) { return sigmoid(x); });
}

Eigen::MatrixXd visible_conditional(const Eigen::MatrixXd& batch, const RbmParameters& params) {
  check_batch(batch, params.hidden_size(), "hidden batch");
  Eigen::MatrixXd act =
      (batch * params.weights.transpose()).rowwise() + params.visible_bias.transpose();
  return act.unaryExpr([](double x) { return sigmoid(x); });
}

double reconstruction_error(const RbmParameters& params, const Eigen::MatrixXd& batch) {
  if (batch.rows() == 0) throw DatasetError("reconstruction_error: empty batch");
  check_batch(batch, params.visible_size(), "visible batch");
  const Eigen::MatrixXd hidden = hidden_conditional(batch, params);
  const Eigen::MatrixXd recon = visible_conditional(hidden, params);
  return (batch - recon).array().square().mean();
}

double mean_energy_sampled(const RbmParameters& params, const Eigen::MatrixXd& batch, Rng& rng) {
  if (batch.rows() == 0) throw DatasetError("mean_energy_sampled: empty batch");
  check_batch(batch, params.visible_size(), "visible batch");
  const Eigen::MatrixXd probs = hidden_conditional(batch, params);
  const Eigen::MatrixXd hidden = sample_bernoulli(probs, rng);
  double total = 0.0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    total += energy(batch.row(r).transpose(), hidden.row(r).transpose(), params);
  }
  return total / static_cast<double>(batch.rows());
}

std::pair<RbmParameters, CdStats> cd_update(const RbmParameters& params,
                                            const Eigen::MatrixXd& batch,
                                            const CdOptions& options, Rng& rng,
                                            GradientTriple* velocity) {
  if (batch.rows() == 0) throw DatasetError("cd_update: empty batch");
  check_batch(batch, params.visible_size(), "visible batch");
  if (options.k < 1) throw ConfigError("cd_k", "must be >= 1");
  if ((batch.array() < 0.0).any() || (batch.array() > 1.0).any()) {
    throw DatasetError("cd_update: batch entries must lie in [0, 1]");
  }

  const double n = static_cast<double>(batch.rows());

  const Eigen::MatrixXd positive_hidden = hidden_conditional(batch, params);
  Eigen::MatrixXd chain_hidden = sample_bernoulli(positive_hidden, rng);
  Eigen::MatrixXd negative_visible;
  Eigen::MatrixXd negative_hidden;
  for (int step = 0; step < options.k; ++step) {
    negative_visible = sample_bernoulli(visible_conditional(chain_hidden, params), rng);
    negative_hidden = hidden_conditional(negative_visible, params);
    if (step + 1 < options.k) chain_hidden = sample_bernoulli(negative_hidden, rng);
  }

  GradientTriple grad;
  grad.d_visible_bias = (batch - negative_visible).colwise().mean().transpose();
  grad.d_hidden_bias = (positive_hidden - negative_hidden).colwise().mean().transpose();
  grad.d_weights =
      (batch.transpose() * positive_hidden - negative_visible.transpose() * negative_hidden) / n;
  if (options.weight_decay != 0.0) {
    grad.d_weights -= options.weight_decay * params.weights;
  }

  const GradientTriple* step_direction = &grad;
  if (options.momentum != 0.0 && velocity != nullptr) {
    velocity->d_visible_bias = options.momentum * velocity->d_visible_bias + grad.d_visible_bias;
    velocity->d_hidden_bias = options.momentum * velocity->d_hidden_bias + grad.d_hidden_bias;
    velocity->d_weights = options.momentum * velocity->d_weights + grad.d_weights;
    step_direction = velocity;
  }

  RbmParameters updated;
  updated.visible_bias = params.visible_bias + options.learning_rate * step_direction->d_visible_bias;
  updated.hidden_bias = params.hidden_bias + options.learning_rate * step_direction->d_hidden_bias;
  updated.weights = params.weights + options.learning_rate * step_direction->d_weights;

  if (!updated.visible_bias.allFinite()) throw NumericError("non-finite update in visible_bias");
  if (!updated.hidden_bias.allFinite()) throw NumericError("non-finite update in hidden_bias");
  if (!updated.weights.allFinite()) throw NumericError("non-finite update in weights");

  CdStats stats;
  stats.reconstruction_error = reconstruction_error(updated, batch);
  stats.mean_energy = mean_energy_sampled(updated, batch, rng);
  stats.grad_norm_c = grad.d_hidden_bias.norm();
  stats.grad_norm_W = grad.d_weights.norm();
  if (!std::isfinite(stats.mean_energy)) throw NumericError("non-finite mean energy statistic");
  return {std::move(updated), stats};
}

}  // namespace adbn
