#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pcrank/design.hpp"
#include "pcrank/error.hpp"
#include "pcrank/estimator.hpp"
#include "support.hpp"

using namespace pcrank;
using namespace testing_support;

namespace {

Dataset mirrored(const Dataset& ds) {
  std::vector<ComparisonRecord> records;
  for (const auto& r : ds.records()) records.push_back(mirror(r));
  return Dataset(ds.n_plus_1(), ds.schema(), std::move(records));
}

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

}  // namespace

TEST_CASE("pseudo-outcome transform") {
  CHECK(pseudo_outcome(1, -0.5, 0.5) == 2.0);
  CHECK(pseudo_outcome(0, 0.5, 0.25) == -4.0);
  CHECK(pseudo_outcome(0, -0.5, 0.25, -1) == -4.0);
  CHECK(pseudo_outcome(1, 0.0, 0.5) == 2.0);
}

TEST_CASE("pseudo-outcomes average within pairs") {
  Eigen::VectorXd z1(1), z2(1);
  z1 << 1.0;
  z2 << 3.0;
  const Dataset ds(2, ColumnSchema::all_continuous(1),
                   {rec(0, 1, 1, 1, -0.5, z1), rec(0, 1, 2, 0, 0.5, z2)});
  const std::vector<double> f{0.5, 0.25};
  const auto po = build_pseudo_outcomes(ds, f);
  CHECK(po.ybreve(0) == doctest::Approx(-1.0));
  CHECK(po.zbar(0, 0) == doctest::Approx(2.0));
  CHECK(po.counts[0] == 2);
  const ConditionalDensityFn bad = [](double, const Eigen::VectorXd&) { return 0.0; };
  CHECK_THROWS_AS(build_pseudo_outcomes(ds, bad), InputError);
}

TEST_CASE("noiseless pseudo-outcomes are recovered exactly on both paths") {
  std::mt19937_64 rng(2);
  for (int n : {3, 8, 15}) {
    const auto complete = DesignOperator::complete(n);
    const auto general = DesignOperator::general(n, all_pairs(n));
    const auto rows = static_cast<Eigen::Index>(complete.rows());
    const Eigen::VectorXd theta = random_vector(n, rng);
    const Eigen::VectorXd eta = random_vector(2, rng);
    const Eigen::MatrixXd zbar = random_matrix(rows, 2, rng);
    const Eigen::VectorXd y = complete.u_apply(theta) + zbar * eta;
    const auto a = least_squares(complete, zbar, y);
    const auto b = least_squares(general, zbar, y);
    CHECK((a.theta - theta).norm() <= 1e-10 * std::max(1.0, theta.norm()));
    CHECK((a.eta - eta).norm() <= 1e-10 * std::max(1.0, eta.norm()));
    CHECK((b.theta - theta).norm() <= 1e-10 * std::max(1.0, theta.norm()));
    CHECK((b.eta - eta).norm() <= 1e-10 * std::max(1.0, eta.norm()));
  }
}

TEST_CASE("fit matches a dense QR least-squares solve") {
  const auto ds = random_dataset(4, 2, 2, 77);
  FitOptions opts;
  opts.bandwidth = 0.9;
  const auto report = fit(ds, opts);

  const auto model = DensityModel::fit(ds, 0.9, opts.density);
  const auto po = build_pseudo_outcomes(ds, model);
  const Eigen::MatrixXd u = dense_u(4, all_pairs(4));
  Eigen::MatrixXd x(u.rows(), u.cols() + 2);
  x << u, po.zbar;
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(po.ybreve);
  CHECK(rel_err(report.theta_hat, beta.head(4)) < 1e-8);
  CHECK(rel_err(report.eta_hat, beta.tail(2)) < 1e-8);

  // normal equations at the solution
  const Eigen::VectorXd resid = po.ybreve - x * beta;
  CHECK((x.transpose() * resid).norm() <= 1e-8 * std::max(1.0, po.ybreve.norm()));

  // closed-form sandwich against dense matrices
  const Eigen::MatrixXd d = dense_d(u);
  const Eigen::MatrixXd gram = po.zbar.transpose() * d * po.zbar;
  const Eigen::MatrixXd gi = gram.inverse();
  const Eigen::MatrixXd sigma = resid.array().square().matrix().asDiagonal();
  const Eigen::MatrixXd cov_eta = gi * po.zbar.transpose() * d * sigma * d * po.zbar * gi;
  const Eigen::MatrixXd vinv = (u.transpose() * u).inverse();
  const Eigen::VectorXd var_theta = (vinv * u.transpose() * sigma * u * vinv).diagonal();
  CHECK(rel_err(report.se_eta, cov_eta.diagonal().cwiseSqrt()) < 1e-8);
  CHECK(rel_err(report.se_theta, var_theta.cwiseSqrt()) < 1e-8);
}

TEST_CASE("report invariants and orientation invariance") {
  const auto ds = random_dataset(7, 3, 2, 5);
  const auto report = fit(ds);
  const auto flipped = fit(mirrored(ds));
  CHECK(report.theta_hat == flipped.theta_hat);
  CHECK(report.eta_hat == flipped.eta_hat);
  CHECK(report.se_theta == flipped.se_theta);
  CHECK(report.ranks == flipped.ranks);

  for (Eigen::Index i = 0; i < report.theta_hat.size(); ++i) {
    CHECK(report.se_theta(i) >= 0.0);
    CHECK(report.ci_theta[static_cast<std::size_t>(i)].lower <= report.theta_hat(i));
    CHECK(report.ci_theta[static_cast<std::size_t>(i)].upper >= report.theta_hat(i));
  }
  for (Eigen::Index k = 0; k < report.eta_hat.size(); ++k) {
    CHECK(report.p_eta(k) >= 0.0);
    CHECK(report.p_eta(k) <= 1.0);
  }
  auto sorted = report.ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) CHECK(sorted[k] == static_cast<int>(k + 1));
  CHECK(report.diagnostics.bandwidth_grid.size() == 6);
  CHECK(report.diagnostics.closed_form);
  CHECK(report.diagnostics.lambda_min > 0.0);
}

TEST_CASE("closed-form and general paths agree on complete designs") {
  const auto ds = random_dataset(9, 2, 2, 13);
  FitOptions opts;
  opts.bandwidth = 0.7;
  const auto a = fit(ds, opts);
  opts.force_general = true;
  const auto b = fit(ds, opts);
  CHECK_FALSE(b.diagnostics.closed_form);
  CHECK(rel_err(a.theta_hat, b.theta_hat) < 1e-8);
  CHECK(rel_err(a.eta_hat, b.eta_hat) < 1e-8);
  CHECK(rel_err(a.se_theta, b.se_theta) < 1e-8);
  CHECK(rel_err(a.se_eta, b.se_eta) < 1e-8);
  // count weights are constant on a balanced design
  opts.force_general = false;
  opts.weight_by_count = true;
  const auto c = fit(ds, opts);
  CHECK(rel_err(a.theta_hat, c.theta_hat) < 1e-8);
  CHECK(rel_err(a.se_eta, c.se_eta) < 1e-8);
}

TEST_CASE("scaling the response scales the estimates") {
  std::mt19937_64 rng(4);
  const int n = 6;
  const auto design = DesignOperator::complete(n);
  const auto rows = static_cast<Eigen::Index>(design.rows());
  const Eigen::MatrixXd zbar = random_matrix(rows, 2, rng);
  const Eigen::VectorXd y = random_vector(rows, rng);
  const auto a = least_squares(design, zbar, y);
  const auto b = least_squares(design, zbar, 2.5 * y);
  CHECK(rel_err(b.theta, 2.5 * a.theta) < 1e-12);
  CHECK(rel_err(b.eta, 2.5 * a.eta) < 1e-12);
  CHECK(rank_items(a.theta) == rank_items(b.theta));
}

TEST_CASE("homoscedastic variance identities") {
  std::mt19937_64 rng(6);
  const int n = 8;
  const double sigma2 = 0.37;
  const auto design = DesignOperator::complete(n);
  const auto rows = static_cast<Eigen::Index>(design.rows());
  const Eigen::MatrixXd u = dense_u(n, all_pairs(n));
  const Eigen::MatrixXd vinv = (u.transpose() * u).inverse();
  const Eigen::VectorXd var = design.sandwich_theta_variance(Eigen::VectorXd::Constant(rows, sigma2));
  CHECK(rel_err(var, sigma2 * vinv.diagonal()) < 1e-10);

  const Eigen::MatrixXd zbar = random_matrix(rows, 3, rng);
  const Eigen::MatrixXd gram = design.projected_gram(zbar);
  const Eigen::MatrixXd zr = design.residualize(zbar);
  const Eigen::MatrixXd gi = gram.inverse();
  const Eigen::MatrixXd sandwich = gi * (sigma2 * zr.transpose() * zr) * gi;
  CHECK(rel_err(sandwich, sigma2 * gi) < 1e-10);
}

TEST_CASE("fit rejects collinear covariates and disconnected designs") {
  std::vector<ComparisonRecord> records;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j <= 5; ++j) {
      Eigen::VectorXd z(1);
      z << static_cast<double>(i - j);
      records.push_back(rec(i, j, 1, (i + j) % 2, 0.1 * (i - j) + 0.05 * i, z));
    }
  const Dataset collinear(6, ColumnSchema::all_continuous(1), records);
  FitOptions opts;
  opts.bandwidth = 1.0;
  CHECK_THROWS_AS(fit(collinear, opts), CollinearityError);

  const auto split = random_dataset(4, 1, 1, 2, {{0, 1}, {2, 3}, {3, 4}});
  CHECK_THROWS_AS(fit(split, opts), IdentifiabilityError);
  opts.ci_level = 1.5;
  CHECK_THROWS_AS(fit(random_dataset(3, 2, 1, 1), opts), InputError);
}

TEST_CASE("ranks follow a known merit ordering") {
  // item 0 New York (reference)
  const std::vector<std::pair<std::string, double>> teams{
      {"MIL", 1.981}, {"TOR", 1.978}, {"PHI", 1.646}, {"BOS", 1.608}, {"IND", 1.579},
      {"ORL", 0.879}, {"BKN", 1.044}, {"DET", 1.241}, {"MIA", 1.062}, {"CHA", 0.905},
      {"WAS", 0.795}, {"ATL", 0.448}, {"CHI", 0.200}, {"CLE", 0.111}, {"GSW", 1.874},
      {"DEN", 1.669}, {"HOU", 1.680}, {"POR", 1.365}, {"UTA", 1.394}, {"OKC", 1.491},
      {"SAS", 1.323}, {"LAC", 1.243}, {"SAC", 0.880}, {"LAL", 0.970}, {"MIN", 0.950},
      {"NOP", 0.824}, {"DAL", 0.696}, {"MEM", 0.713}, {"PHX", 0.043}};
  const std::vector<int> expected{1,  2,  6,  7,  8,  21, 16, 14, 15, 19, 23, 26, 27, 28, 3,
                                   5,  4,  11, 10, 9,  12, 13, 20, 17, 18, 22, 25, 24, 29};
  Eigen::VectorXd theta(static_cast<Eigen::Index>(teams.size()));
  for (std::size_t k = 0; k < teams.size(); ++k) theta(static_cast<Eigen::Index>(k)) = teams[k].second;
  const auto ranks = rank_items(theta);
  CHECK(ranks[0] == 30);
  for (std::size_t k = 0; k < teams.size(); ++k) CHECK(ranks[k + 1] == expected[k]);

  CHECK(rank_items(Eigen::VectorXd::Zero(4)) == std::vector<int>{1, 2, 3, 4, 5});
  Eigen::VectorXd distinct(3);
  distinct << 0.5, -1.0, 2.0;
  CHECK(rank_items(distinct) == std::vector<int>{3, 2, 4, 1});
  CHECK(rank_items(-distinct) == std::vector<int>{2, 3, 1, 4});
}

TEST_CASE("trend sign check") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<ComparisonRecord> up;
  std::vector<ComparisonRecord> flat;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(0);
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j <= 10; ++j)
      for (int t = 1; t <= 6; ++t) {
        const double x0 = unif(rng);
        up.push_back(rec(i, j, t, x0 > g(rng) ? 1 : 0, x0, z));
        flat.push_back(rec(i, j, t, unif(rng) > 0.0 ? 1 : 0, x0, z));
      }
  const Dataset inc(11, ColumnSchema::all_continuous(0), up);
  const auto s = trend_sign_check(inc, 5);
  CHECK(s.sign == 1);
  CHECK(s.kendall_tau == doctest::Approx(1.0));
  CHECK_FALSE(s.low_confidence);
  CHECK(s.win_rate.size() == 5);
  CHECK(s.edges.front() == doctest::Approx(-s.edges.back()));

  const auto down = trend_sign_check(inc.with_special_sign(-1), 5);
  CHECK(down.sign == 1);  // the check reads the data, not the configured sign
  const auto mirrored_check = trend_sign_check(mirrored(inc), 5);
  CHECK(mirrored_check.win_rate == s.win_rate);

  const Dataset noise(11, ColumnSchema::all_continuous(0), flat);
  CHECK(trend_sign_check(noise, 3).low_confidence);

  // two clusters far apart leave the middle buckets empty
  std::vector<ComparisonRecord> gap{rec(0, 1, 1, 1, 3.0, z), rec(0, 1, 2, 1, 2.9, z),
                                    rec(0, 1, 3, 0, -0.1, z)};
  const auto merged = trend_sign_check(Dataset(2, ColumnSchema::all_continuous(0), gap), 6);
  CHECK(merged.merged_buckets);
  std::size_t total = 0;
  for (auto c : merged.bucket_counts) {
    CHECK(c > 0);
    total += c;
  }
  CHECK(total == 6);
  CHECK(merged.edges.size() == merged.win_rate.size() + 1);
  CHECK_THROWS_AS(trend_sign_check(inc, 1), InputError);
}
