#include "adbn/exact.hpp"

#include <cmath>
#include <string>

namespace adbn {

namespace {

void check_enumeration_guard(const RbmParameters& params) {
  const Eigen::Index bits = params.visible_size() + params.hidden_size();
  if (bits > kMaxEnumerationBits) {
    throw EnumerationLimitError("instance too large for exact enumeration: I+J=" +
                                std::to_string(bits) + " exceeds " +
                                std::to_string(kMaxEnumerationBits));
  }
}

Eigen::VectorXd bits_to_vector(std::uint64_t mask, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<double>((mask >> i) & 1u);
  return v;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

}  // namespace

double partition_function(const RbmParameters& params) {
  check_enumeration_guard(params);
  const Eigen::Index visible = params.visible_size();
  double z = 0.0;
  // Enumerate v; the sum over h factorizes into prod_j (1 + exp(a_j)).
  for (std::uint64_t mask = 0; mask < (1ull << visible); ++mask) {
    const Eigen::VectorXd v = bits_to_vector(mask, visible);
    const Eigen::VectorXd act = params.hidden_bias + params.weights.transpose() * v;
    double term = std::exp(params.visible_bias.dot(v));
    for (Eigen::Index j = 0; j < act.size(); ++j) term *= 1.0 + std::exp(act(j));
    z += term;
  }
  return z;
}

double joint_probability(const Eigen::VectorXd& v, const Eigen::VectorXd& h,
                         const RbmParameters& params) {
  const double z = partition_function(params);
  return std::exp(-energy(v, h, params)) / z;
}

double exact_log_likelihood(const RbmParameters& params, const Eigen::MatrixXd& batch) {
  if (batch.rows() == 0) throw DatasetError("exact_log_likelihood: empty batch");
  check_enumeration_guard(params);
  const double log_z = std::log(partition_function(params));
  double total = 0.0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const Eigen::VectorXd v = batch.row(r).transpose();
    const Eigen::VectorXd act = params.hidden_bias + params.weights.transpose() * v;
    double log_unnorm = params.visible_bias.dot(v);
    for (Eigen::Index j = 0; j < act.size(); ++j) log_unnorm += softplus(act(j));
    total += log_unnorm - log_z;
  }
  return total / static_cast<double>(batch.rows());
}

GradientTriple exact_loglik_gradient(const RbmParameters& params, const Eigen::MatrixXd& batch) {
  if (batch.rows() == 0) throw DatasetError("exact_loglik_gradient: empty batch");
  check_enumeration_guard(params);
  const Eigen::Index visible = params.visible_size();
  const Eigen::Index hidden = params.hidden_size();
  if (batch.cols() != visible) {
    throw ShapeError("visible batch dimension " + std::to_string(batch.cols()) +
                     " does not match parameter dimension " + std::to_string(visible));
  }

  double z = 0.0;
  Eigen::VectorXd model_v = Eigen::VectorXd::Zero(visible);
  Eigen::VectorXd model_h = Eigen::VectorXd::Zero(hidden);
  Eigen::MatrixXd model_vh = Eigen::MatrixXd::Zero(visible, hidden);
  for (std::uint64_t mask = 0; mask < (1ull << visible); ++mask) {
    const Eigen::VectorXd v = bits_to_vector(mask, visible);
    const Eigen::VectorXd act = params.hidden_bias + params.weights.transpose() * v;
    double weight = std::exp(params.visible_bias.dot(v));
    for (Eigen::Index j = 0; j < hidden; ++j) weight *= 1.0 + std::exp(act(j));
    const Eigen::VectorXd cond = act.unaryExpr([](double x) { return sigmoid(x); });
    z += weight;
    model_v += weight * v;
    model_h += weight * cond;
    model_vh += weight * (v * cond.transpose());
  }
  model_v /= z;
  model_h /= z;
  model_vh /= z;

  const double n = static_cast<double>(batch.rows());
  const Eigen::MatrixXd data_hidden = hidden_conditional(batch, params);
  GradientTriple grad;
  grad.d_visible_bias = batch.colwise().mean().transpose() - model_v;
  grad.d_hidden_bias = data_hidden.colwise().mean().transpose() - model_h;
  grad.d_weights = (batch.transpose() * data_hidden) / n - model_vh;
  return grad;
}

}  // namespace adbn
