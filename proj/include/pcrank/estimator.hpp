#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcrank/dataset.hpp"
#include "pcrank/design.hpp"
#include "pcrank/kernel_density.hpp"

namespace pcrank {

// Per-pair averages of the pseudo-outcomes and of the covariates, rows in
// pair_index order.
struct PseudoOutcomes {
  Eigen::VectorXd ybreve;
  Eigen::MatrixXd zbar;
  std::vector<std::size_t> counts;
  std::size_t floor_hits = 0;
};

// Single pseudo-outcome (a - I(s x0 > 0)) / f. With s = +1 this is the usual
// special-regressor transform; s = -1 is the same transform applied to -x0.
double pseudo_outcome(int outcome, double x0, double density, int special_sign = 1);

// `densities` holds f-hat at each canonical record (Dataset order).
PseudoOutcomes build_pseudo_outcomes(const Dataset& dataset, std::span<const double> densities);
PseudoOutcomes build_pseudo_outcomes(const Dataset& dataset, const DensityModel& density);
PseudoOutcomes build_pseudo_outcomes(const Dataset& dataset, const ConditionalDensityFn& density);

struct FitOptions {
  std::optional<double> bandwidth;  // unset: select over `bandwidth_grid`
  std::vector<double> bandwidth_grid;  // empty: default_bandwidth_grid
  std::vector<double> deltas = default_deltas();
  DensityOptions density;
  ConditionalDensityFn oracle_density;  // when set, replaces the kernel estimate
  double ci_level = 0.95;
  bool weight_by_count = false;  // weight pair rows by T_ij (general path)
  bool force_general = false;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct EstimateDiagnostics {
  double bandwidth = 0.0;  // NaN when an oracle density was supplied
  std::vector<double> bandwidth_grid;
  std::vector<double> bandwidth_criterion;
  double lambda_min = 0.0;  // of Zbar' D Zbar / rows
  std::size_t floor_hits = 0;
  bool closed_form = true;
  bool variance_unreliable = false;
  // Both sandwich plug-ins use the observable residuals xi-hat.
  std::string variance_plugin = "xi_residual";
};

struct EstimateReport {
  Eigen::VectorXd theta_hat;  // theta_1..theta_n
  Eigen::VectorXd eta_hat;
  Eigen::VectorXd se_theta;
  Eigen::VectorXd se_eta;
  double ci_level = 0.95;
  std::vector<Interval> ci_theta;
  std::vector<Interval> ci_eta;
  Eigen::VectorXd p_eta;
  std::vector<int> ranks;  // rank of item 0..n, 1 = best
  EstimateDiagnostics diagnostics;
};

// Least squares of y on [U | Zbar]: closed-form formulas on a closed_form
// design, block elimination otherwise.
ParameterSet least_squares(const DesignOperator& design, const Eigen::MatrixXd& zbar,
                           const Eigen::VectorXd& y);

// lambda_min(Zbar' D Zbar) and the trace, for the Condition-4 style check.
std::pair<double, double> projected_gram_spectrum(const DesignOperator& design,
                                                  const Eigen::MatrixXd& zbar);

struct ResidualVariances {
  Eigen::VectorXd xi_sq;   // squared residuals per pair row
  Eigen::VectorXd tau_sq;  // plug-in for the tau variance; equals xi_sq
};

struct SandwichVariance {
  ResidualVariances residuals;
  Eigen::MatrixXd cov_eta;
  Eigen::VectorXd var_theta;
  bool unreliable = false;  // residual degrees of freedom < parameter count
};

SandwichVariance sandwich_variance(const DesignOperator& design, const Eigen::MatrixXd& zbar,
                                   const Eigen::VectorXd& y, const ParameterSet& estimates);

EstimateReport fit(const Dataset& dataset, const FitOptions& options = {});

// Rank of each item 0..n (theta_0 = 0 included) by theta descending; ties go
// to the smaller item id, so ranks are always a permutation of 1..n+1.
std::vector<int> rank_items(const Eigen::VectorXd& theta_hat);

struct SignCheck {
  int sign = 1;
  std::vector<double> win_rate;
  std::vector<std::size_t> bucket_counts;
  std::vector<double> edges;  // bucket boundaries, size win_rate.size() + 1
  double kendall_tau = 0.0;
  bool merged_buckets = false;
  bool low_confidence = false;
};

// Splits the support of x0 (all ordered comparisons) into K equal intervals
// and reports the head win rate in each; the sign of the trend decides the
// special-regressor sign.
SignCheck trend_sign_check(const Dataset& dataset, int buckets);

double normal_quantile(double p);
double two_sided_p_value(double z);

}  // namespace pcrank
