#pragma once

#include "adbn/rbm.hpp"

namespace adbn {

/// Guard for the exact-model routines: at most 2^22 (v, h) configurations.
inline constexpr Eigen::Index kMaxEnumerationBits = 22;

/// Z = sum over all 2^I * 2^J binary pairs of exp(-E(v, h)).
double partition_function(const RbmParameters& params);

/// exp(-E(v, h)) / Z.
double joint_probability(const Eigen::VectorXd& v, const Eigen::VectorXd& h,
                         const RbmParameters& params);

/// Mean over the batch of log p(v), with p the exactly normalized model.
double exact_log_likelihood(const RbmParameters& params, const Eigen::MatrixXd& batch);

/// Exact gradient of the mean log-likelihood, using the true model
/// expectations computed from Z. Test oracle for CD's stochastic estimate.
GradientTriple exact_loglik_gradient(const RbmParameters& params, const Eigen::MatrixXd& batch);

}  // namespace adbn
