#include <doctest.h>

#include <cmath>

#include "pcrank/bt_baseline.hpp"
#include "pcrank/error.hpp"
#include "support.hpp"

using namespace pcrank;
using namespace testing_support;

namespace {

ComparisonRecord rec(ItemId h, ItemId t, int occ, int a, double x0, Eigen::VectorXd z) {
  ComparisonRecord r;
  r.head = h;
  r.tail = t;
  r.occasion = occ;
  r.outcome = a;
  r.x0 = x0;
  r.z = std::move(z);
  return r;
}

// Plain gradient ascent on the logistic log-likelihood written out directly.
Eigen::VectorXd ascent_oracle(const Dataset& ds, int iterations, double step) {
  const int n = ds.n();
  const int p = ds.schema().p();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n + p);
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n + p);
    for (const auto& r : ds.records()) {
      double mu = ds.schema().special_sign * r.x0 + r.z.dot(beta.tail(p));
      if (r.head > 0) mu += beta(r.head - 1);
      if (r.tail > 0) mu -= beta(r.tail - 1);
      const double resid = r.outcome - 1.0 / (1.0 + std::exp(-mu));
      if (r.head > 0) grad(r.head - 1) += resid;
      if (r.tail > 0) grad(r.tail - 1) -= resid;
      grad.tail(p) += resid * r.z;
    }
    beta += step * grad;
  }
  return beta;
}

}  // namespace

TEST_CASE("Newton fit matches a gradient-ascent oracle on a small instance") {
  const auto ds = random_dataset(3, 8, 2, 99);
  const auto fit = fit_bt_mle(ds);
  CHECK(fit.converged);
  CHECK(fit.gradient_norm < 1e-8);
  const Eigen::VectorXd oracle = ascent_oracle(ds, 40000, 0.02);
  CHECK((fit.theta_mle - oracle.head(3)).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((fit.eta_mle - oracle.tail(2)).lpNorm<Eigen::Infinity>() < 1e-6);
  for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k) {
    CHECK(fit.loglik_trace[k] >= fit.loglik_trace[k - 1]);
  }
  CHECK(bt_loglik(ds, fit.theta_mle, fit.eta_mle) == doctest::Approx(fit.loglik));
}

TEST_CASE("analytic gradient matches finite differences") {
  const auto ds = random_dataset(4, 3, 2, 3);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd theta = 0.3 * random_vector(4, rng);
  const Eigen::VectorXd eta = 0.3 * random_vector(2, rng);
  const Eigen::VectorXd grad = bt_gradient(ds, theta, eta);
  const double h = 1e-6;
  for (int k = 0; k < 6; ++k) {
    Eigen::VectorXd tp = theta, tm = theta, ep = eta, em = eta;
    if (k < 4) {
      tp(k) += h;
      tm(k) -= h;
    } else {
      ep(k - 4) += h;
      em(k - 4) -= h;
    }
    const double fd = (bt_loglik(ds, tp, ep) - bt_loglik(ds, tm, em)) / (2.0 * h);
    CHECK(grad(k) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK_THROWS_AS(bt_gradient(ds, Eigen::VectorXd::Zero(2), eta), DimensionError);
}

TEST_CASE("orientation does not matter") {
  const auto ds = random_dataset(5, 4, 1, 21);
  std::vector<ComparisonRecord> flipped;
  for (const auto& r : ds.records()) flipped.push_back(mirror(r));
  const auto a = fit_bt_mle(ds);
  const auto b = fit_bt_mle(Dataset(ds.n_plus_1(), ds.schema(), flipped));
  CHECK(rel_err(a.theta_mle, b.theta_mle) < 1e-10);
  CHECK(rel_err(a.eta_mle, b.eta_mle) < 1e-10);
}

TEST_CASE("separated data is reported") {
  // item 1 beats item 0 every time
  std::vector<ComparisonRecord> records;
  for (int t = 1; t <= 5; ++t) records.push_back(rec(0, 1, t, 0, 0.0, Eigen::VectorXd::Zero(0)));
  const Dataset ds(2, ColumnSchema::all_continuous(0), records);
  CHECK_THROWS_AS(fit_bt_mle(ds), SeparationError);
}
