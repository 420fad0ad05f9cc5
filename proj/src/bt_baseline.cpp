#include "pcrank/bt_baseline.hpp"

#include <cmath>

#include "pcrank/error.hpp"

namespace pcrank {

namespace {

double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double linear_index(const ComparisonRecord& r, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& eta, int sign) {
  double mu = sign * r.x0 + r.z.dot(eta);
  if (r.head > 0) mu += theta(r.head - 1);
  if (r.tail > 0) mu -= theta(r.tail - 1);
  return mu;
}

void check_sizes(const Dataset& dataset, const Eigen::VectorXd& theta, const Eigen::VectorXd& eta) {
  if (theta.size() != dataset.n() || eta.size() != dataset.schema().p()) {
    throw DimensionError("Bradley-Terry parameters do not match the dataset");
  }
}

struct Derivatives {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd information;  // negative Hessian
};

Derivatives derivatives(const Dataset& dataset, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& eta) {
  const Eigen::Index n = theta.size();
  const Eigen::Index p = eta.size();
  const int sign = dataset.schema().special_sign;
  Derivatives d;
  d.gradient = Eigen::VectorXd::Zero(n + p);
  d.information = Eigen::MatrixXd::Zero(n + p, n + p);
  for (const auto& r : dataset.records()) {
    const double mu = linear_index(r, theta, eta, sign);
    const double prob = logistic(mu);
    const double resid = r.outcome - prob;
    const double w = prob * (1.0 - prob);
    d.loglik += r.outcome * mu - log1p_exp(mu);

    const Eigen::Index h = r.head - 1;  // -1 for the reference item
    const Eigen::Index t = r.tail - 1;
    if (h >= 0) {
      d.gradient(h) += resid;
      d.information(h, h) += w;
    }
    if (t >= 0) {
      d.gradient(t) -= resid;
      d.information(t, t) += w;
    }
    if (h >= 0 && t >= 0) {
      d.information(h, t) -= w;
      d.information(t, h) -= w;
    }
    if (p > 0) {
      d.gradient.tail(p) += resid * r.z;
      d.information.bottomRightCorner(p, p).noalias() += w * r.z * r.z.transpose();
      if (h >= 0) {
        d.information.row(h).tail(p) += w * r.z.transpose();
        d.information.col(h).tail(p) += w * r.z;
      }
      if (t >= 0) {
        d.information.row(t).tail(p) -= w * r.z.transpose();
        d.information.col(t).tail(p) -= w * r.z;
      }
    }
  }
  return d;
}

}  // namespace

double bt_loglik(const Dataset& dataset, const Eigen::VectorXd& theta, const Eigen::VectorXd& eta) {
  check_sizes(dataset, theta, eta);
  const int sign = dataset.schema().special_sign;
  double ll = 0.0;
  for (const auto& r : dataset.records()) {
    const double mu = linear_index(r, theta, eta, sign);
    ll += r.outcome * mu - log1p_exp(mu);
  }
  return ll;
}

Eigen::VectorXd bt_gradient(const Dataset& dataset, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& eta) {
  check_sizes(dataset, theta, eta);
  return derivatives(dataset, theta, eta).gradient;
}

BtFitResult fit_bt_mle(const Dataset& dataset, const BtOptions& options) {
  if (dataset.n_plus_1() < 2) throw TooFewItemsError("at least two items are required");
  const Eigen::Index n = dataset.n();
  const Eigen::Index p = dataset.schema().p();

  BtFitResult out;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n + p);
  Derivatives d = derivatives(dataset, beta.head(n), beta.tail(p));
  out.loglik_trace.push_back(d.loglik);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.gradient_norm = d.gradient.lpNorm<Eigen::Infinity>();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(d.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw IdentifiabilityError("Bradley-Terry information matrix is not positive definite");
    }
    const Eigen::VectorXd step = ldlt.solve(d.gradient);
    // A vanishing gradient with a Newton step that stays large means the
    // likelihood keeps rising towards infinity (separation).
    if (out.gradient_norm < options.gradient_tolerance && step.lpNorm<Eigen::Infinity>() < 1e-4) {
      out.converged = true;
      break;
    }

    double scale = 1.0;
    Derivatives next;
    Eigen::VectorXd candidate;
    for (;;) {
      candidate = beta + scale * step;
      next = derivatives(dataset, candidate.head(n), candidate.tail(p));
      if (next.loglik >= d.loglik || scale < 1e-12) break;
      scale *= 0.5;
    }
    if (next.loglik < d.loglik) {
      // no ascent possible at round-off level
      if (out.gradient_norm < options.gradient_tolerance) {
        throw SeparationError("log-likelihood keeps increasing along a fixed direction; "
                              "the comparisons are (quasi-)separated");
      }
      break;
    }
    beta = candidate;
    d = std::move(next);
    out.iterations = iter + 1;
    out.loglik_trace.push_back(d.loglik);

    if (n > 0 && beta.head(n).cwiseAbs().maxCoeff() > options.separation_threshold) {
      throw SeparationError("merit estimate exceeded " +
                            std::to_string(options.separation_threshold) +
                            " in absolute value; the comparisons are (quasi-)separated");
    }
  }
  out.gradient_norm = d.gradient.lpNorm<Eigen::Infinity>();
  out.theta_mle = beta.head(n);
  out.eta_mle = beta.tail(p);
  out.loglik = d.loglik;
  return out;
}

}  // namespace pcrank
