#include "pcrank/estimator.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcrank/error.hpp"

namespace pcrank {

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double two_sided_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double pseudo_outcome(int outcome, double x0, double density, int special_sign) {
  const double indicator = special_sign * x0 > 0.0 ? 1.0 : 0.0;
  return (static_cast<double>(outcome) - indicator) / density;
}

PseudoOutcomes build_pseudo_outcomes(const Dataset& dataset, std::span<const double> densities) {
  const auto records = dataset.records();
  if (densities.size() != records.size()) {
    throw DimensionError("build_pseudo_outcomes: one density value per record expected");
  }
  const int sign = dataset.schema().special_sign;
  const auto rows = static_cast<Eigen::Index>(dataset.pairs().size());
  PseudoOutcomes out;
  out.ybreve = Eigen::VectorXd::Zero(rows);
  out.zbar = Eigen::MatrixXd::Zero(rows, dataset.schema().p());
  out.counts.reserve(static_cast<std::size_t>(rows));
  for (Eigen::Index row = 0; row < rows; ++row) {
    const auto& slot = dataset.pairs()[static_cast<std::size_t>(row)];
    if (slot.count == 0) throw Error("pair index lists a pair without comparisons");
    for (std::size_t k = slot.first; k < slot.first + slot.count; ++k) {
      const auto& r = records[k];
      out.ybreve(row) += pseudo_outcome(r.outcome, r.x0, densities[k], sign);
      out.zbar.row(row) += r.z.transpose();
    }
    const double count = static_cast<double>(slot.count);
    out.ybreve(row) /= count;
    out.zbar.row(row) /= count;
    out.counts.push_back(slot.count);
  }
  return out;
}

PseudoOutcomes build_pseudo_outcomes(const Dataset& dataset, const DensityModel& density) {
  const auto eval = density.record_densities(dataset);
  auto out = build_pseudo_outcomes(dataset, eval.values);
  out.floor_hits = eval.floor_hits;
  return out;
}

PseudoOutcomes build_pseudo_outcomes(const Dataset& dataset, const ConditionalDensityFn& density) {
  std::vector<double> values;
  values.reserve(dataset.records().size());
  for (const auto& r : dataset.records()) {
    const double f = density(r.x0, r.z);
    if (!(f > 0.0) || !std::isfinite(f)) throw InputError("oracle density must be positive");
    values.push_back(f);
  }
  return build_pseudo_outcomes(dataset, values);
}

std::pair<double, double> projected_gram_spectrum(const DesignOperator& design,
                                                  const Eigen::MatrixXd& zbar) {
  if (zbar.cols() == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  Eigen::MatrixXd gram;
  if (design.mode() == DesignMode::closed_form) {
    gram = design.projected_gram(zbar);
  } else {
    const Eigen::MatrixXd r = design.residualize(zbar);
    gram = r.transpose() * r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues()(0), gram.trace()};
}

ParameterSet least_squares(const DesignOperator& design, const Eigen::MatrixXd& zbar,
                           const Eigen::VectorXd& y) {
  if (design.mode() == DesignMode::general) return design.solve_normal_equations(zbar, y);

  ParameterSet out;
  out.eta = Eigen::VectorXd::Zero(zbar.cols());
  if (zbar.cols() > 0) {
    const Eigen::MatrixXd gram = design.projected_gram(zbar);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()(0) > 1e-10 * gram.trace())) {
      throw CollinearityError(
          "Zbar' D Zbar is singular (smallest eigenvalue below 1e-10 * trace): covariates "
          "lie (nearly) in the column space of the merit design");
    }
    out.eta = gram.ldlt().solve(zbar.transpose() * design.d_apply(y));
  }
  out.theta = design.v_inverse_apply(design.u_transpose_apply(y - zbar * out.eta));
  return out;
}

SandwichVariance sandwich_variance(const DesignOperator& design, const Eigen::MatrixXd& zbar,
                                   const Eigen::VectorXd& y, const ParameterSet& estimates) {
  const auto rows = static_cast<Eigen::Index>(design.rows());
  if (y.size() != rows || zbar.rows() != rows) {
    throw DimensionError("sandwich_variance: inputs must have one row per pair");
  }
  SandwichVariance out;
  const Eigen::VectorXd resid = y - design.u_apply(estimates.theta) - zbar * estimates.eta;
  out.residuals.xi_sq = resid.array().square().matrix();
  out.residuals.tau_sq = out.residuals.xi_sq;

  const Eigen::Index p = zbar.cols();
  out.cov_eta = Eigen::MatrixXd::Zero(p, p);
  if (p > 0) {
    Eigen::VectorXd w2 = Eigen::VectorXd::Ones(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
      const double w = design.weight(static_cast<std::size_t>(k));
      w2(k) = w * w;
    }
    const Eigen::MatrixXd z_res = design.residualize(zbar);
    Eigen::MatrixXd bread;
    if (design.mode() == DesignMode::closed_form) {
      bread = design.projected_gram(zbar);
    } else {
      Eigen::VectorXd w = Eigen::VectorXd::Ones(rows);
      for (Eigen::Index k = 0; k < rows; ++k) w(k) = design.weight(static_cast<std::size_t>(k));
      bread = z_res.transpose() * w.asDiagonal() * z_res;
    }
    const Eigen::VectorXd meat_weights =
        (w2.array() * out.residuals.tau_sq.array()).matrix();
    const Eigen::MatrixXd meat = z_res.transpose() * meat_weights.asDiagonal() * z_res;
    const Eigen::MatrixXd bread_inv = bread.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    out.cov_eta = bread_inv * meat * bread_inv;
    out.cov_eta = 0.5 * (out.cov_eta + out.cov_eta.transpose());
  }
  out.var_theta = design.sandwich_theta_variance(out.residuals.xi_sq);

  const auto params = static_cast<Eigen::Index>(design.n()) + p;
  out.unreliable = rows - params < params;
  return out;
}

std::vector<int> rank_items(const Eigen::VectorXd& theta_hat) {
  const auto items = static_cast<std::size_t>(theta_hat.size() + 1);
  auto merit = [&](std::size_t item) { return item == 0 ? 0.0 : theta_hat(static_cast<Eigen::Index>(item - 1)); };
  std::vector<std::size_t> order(items);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return merit(a) > merit(b); });
  std::vector<int> ranks(items);
  for (std::size_t pos = 0; pos < items; ++pos) ranks[order[pos]] = static_cast<int>(pos + 1);
  return ranks;
}

EstimateReport fit(const Dataset& dataset, const FitOptions& options) {
  if (dataset.n_plus_1() < 2) throw TooFewItemsError("at least two items are required");
  if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) {
    throw InputError("confidence level must lie in (0, 1)");
  }

  const bool general = options.force_general || options.weight_by_count || !dataset.complete();
  DesignOperator design = DesignOperator::complete(std::max(dataset.n(), 1));
  if (general) {
    std::vector<std::pair<ItemId, ItemId>> pairs;
    std::vector<double> weights;
    for (const auto& slot : dataset.pairs()) {
      pairs.emplace_back(slot.i, slot.j);
      if (options.weight_by_count) weights.push_back(static_cast<double>(slot.count));
    }
    design = DesignOperator::general(dataset.n(), std::move(pairs), std::move(weights));
  }

  EstimateReport report;
  report.ci_level = options.ci_level;
  auto& diag = report.diagnostics;
  diag.closed_form = design.mode() == DesignMode::closed_form;

  PseudoOutcomes pseudo;
  if (options.oracle_density) {
    pseudo = build_pseudo_outcomes(dataset, options.oracle_density);
    diag.bandwidth = std::numeric_limits<double>::quiet_NaN();
  } else if (options.bandwidth) {
    const auto model = DensityModel::fit(dataset, *options.bandwidth, options.density);
    pseudo = build_pseudo_outcomes(dataset, model);
    diag.bandwidth = *options.bandwidth;
  } else {
    auto grid = options.bandwidth_grid.empty() ? default_bandwidth_grid(dataset)
                                               : options.bandwidth_grid;
    auto selection = select_bandwidth(dataset, std::move(grid), options.deltas, options.density);
    pseudo = build_pseudo_outcomes(dataset, selection.selected.values);
    pseudo.floor_hits = selection.selected.floor_hits;
    diag.bandwidth = selection.bandwidth;
    diag.bandwidth_grid = std::move(selection.grid);
    diag.bandwidth_criterion = std::move(selection.criterion);
  }
  diag.floor_hits = pseudo.floor_hits;

  const auto [lambda, trace] = projected_gram_spectrum(design, pseudo.zbar);
  diag.lambda_min = lambda / static_cast<double>(design.rows());
  if (pseudo.zbar.cols() > 0 && !(lambda > 1e-10 * trace)) {
    throw CollinearityError(
        "lambda_min(Zbar' D Zbar) is below 1e-10 * trace; the covariates carry no "
        "information beyond the merit design");
  }

  const ParameterSet estimates = least_squares(design, pseudo.zbar, pseudo.ybreve);
  const SandwichVariance variance =
      sandwich_variance(design, pseudo.zbar, pseudo.ybreve, estimates);
  diag.variance_unreliable = variance.unreliable;

  report.theta_hat = estimates.theta;
  report.eta_hat = estimates.eta;
  report.se_theta = variance.var_theta.cwiseMax(0.0).cwiseSqrt();
  report.se_eta = variance.cov_eta.diagonal().cwiseMax(0.0).cwiseSqrt();

  const double z = normal_quantile(0.5 + 0.5 * options.ci_level);
  for (Eigen::Index i = 0; i < report.theta_hat.size(); ++i) {
    report.ci_theta.push_back({report.theta_hat(i) - z * report.se_theta(i),
                               report.theta_hat(i) + z * report.se_theta(i)});
  }
  report.p_eta = Eigen::VectorXd::Zero(report.eta_hat.size());
  for (Eigen::Index k = 0; k < report.eta_hat.size(); ++k) {
    report.ci_eta.push_back({report.eta_hat(k) - z * report.se_eta(k),
                             report.eta_hat(k) + z * report.se_eta(k)});
    report.p_eta(k) = report.se_eta(k) > 0.0
                          ? two_sided_p_value(report.eta_hat(k) / report.se_eta(k))
                          : (report.eta_hat(k) == 0.0 ? 1.0 : 0.0);
  }
  report.ranks = rank_items(report.theta_hat);
  return report;
}

SignCheck trend_sign_check(const Dataset& dataset, int buckets) {
  if (buckets < 2) throw InputError("sign check needs at least two buckets");
  const auto records = dataset.records();
  if (records.empty()) throw InputError("sign check on an empty dataset");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : records) {
    lo = std::min({lo, r.x0, -r.x0});
    hi = std::max({hi, r.x0, -r.x0});
  }
  if (!(hi > lo)) throw InputError("special regressor has no spread");
  const double width = (hi - lo) / buckets;

  std::vector<double> wins(static_cast<std::size_t>(buckets), 0.0);
  std::vector<std::size_t> totals(static_cast<std::size_t>(buckets), 0);
  auto add = [&](double x, int outcome) {
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(buckets - 1),
                                         static_cast<std::size_t>((x - lo) / width));
    wins[k] += outcome;
    ++totals[k];
  };
  for (const auto& r : records) {
    add(r.x0, r.outcome);
    add(-r.x0, 1 - r.outcome);
  }

  SignCheck out;
  struct Bucket {
    double wins;
    std::size_t total;
    double lower;
    double upper;
  };
  std::vector<Bucket> merged;
  for (int k = 0; k < buckets; ++k) {
    const auto sk = static_cast<std::size_t>(k);
    Bucket b{wins[sk], totals[sk], lo + k * width, k + 1 == buckets ? hi : lo + (k + 1) * width};
    // An empty bucket is absorbed by the next one (the last by its predecessor).
    if (!merged.empty() && merged.back().total == 0) {
      out.merged_buckets = true;
      b.lower = merged.back().lower;
      merged.back() = b;
    } else {
      merged.push_back(b);
    }
  }
  if (merged.size() > 1 && merged.back().total == 0) {
    out.merged_buckets = true;
    merged[merged.size() - 2].upper = merged.back().upper;
    merged.pop_back();
  }

  out.edges.push_back(merged.front().lower);
  for (const auto& b : merged) {
    out.win_rate.push_back(b.wins / static_cast<double>(b.total));
    out.bucket_counts.push_back(b.total);
    out.edges.push_back(b.upper);
  }

  const std::size_t m = out.win_rate.size();
  double concordant = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double d = out.win_rate[b] - out.win_rate[a];
      concordant += d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
  out.kendall_tau = m > 1 ? concordant / (0.5 * static_cast<double>(m * (m - 1))) : 0.0;
  out.sign = out.kendall_tau < 0.0 ? -1 : 1;

  bool all_near_half = true;
  for (std::size_t k = 0; k < m; ++k) {
    const double se = std::sqrt(0.25 / static_cast<double>(out.bucket_counts[k]));
    if (std::abs(out.win_rate[k] - 0.5) >= 2.0 * se) all_near_half = false;
  }
  out.low_confidence = all_near_half || out.kendall_tau == 0.0;
  return out;
}

}  // namespace pcrank
