#pragma once

#include <Eigen/Dense>

#include <vector>

#include "pcrank/dataset.hpp"

namespace pcrank {

struct BtOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 200;
  double separation_threshold = 30.0;
};

struct BtFitResult {
  Eigen::VectorXd theta_mle;  // theta_1..theta_n
  Eigen::VectorXd eta_mle;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;  // infinity norm
  std::vector<double> loglik_trace;  // one entry per accepted iterate, start included
};

// Covariate-adjusted Bradley-Terry log-likelihood with x0 entering as an
// offset with coefficient schema.special_sign.
double bt_loglik(const Dataset& dataset, const Eigen::VectorXd& theta, const Eigen::VectorXd& eta);
Eigen::VectorXd bt_gradient(const Dataset& dataset, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& eta);

// Damped Newton on the concave log-likelihood. Throws SeparationError when a
// merit leaves [-30, 30]; returns converged = false when out of iterations.
BtFitResult fit_bt_mle(const Dataset& dataset, const BtOptions& options = {});

}  // namespace pcrank
