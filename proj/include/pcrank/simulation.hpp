#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pcrank/dataset.hpp"
#include "pcrank/kernel_density.hpp"

namespace pcrank {

enum class NoiseKind { gauss, logistic_unit_var, mix_norm, logistic_standard };

NoiseKind parse_noise(const std::string& name);
std::string noise_name(NoiseKind kind);

double sample_noise(NoiseKind kind, std::mt19937_64& rng);

// splitmix64 finalizer; child seeds are mix(root + k * golden).
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

struct SimConfig {
  int n = 50;  // items are 0..n
  int T = 3;
  NoiseKind noise = NoiseKind::gauss;
  int reps = 100;
  std::uint64_t seed = 20240601;
  Eigen::Vector2d eta_star{-0.5, 0.5};
  Eigen::Matrix2d z_cov = (Eigen::Matrix2d() << 1.0, 0.25, 0.25, 1.0).finished();
  Eigen::Vector2d b{0.5, -0.5};
  std::vector<int> tracked_items;  // empty: {1, n/4, n/2, 3n/4, n}

  // Draw Z once per pair and reuse it on every occasion (x0 and the noise
  // are still drawn per occasion).
  bool covariates_per_pair = false;
  bool sparse = false;
  std::optional<double> forced_pair_probability;  // sparse schedule override

  std::optional<double> bandwidth;  // unset: select each replication
  bool oracle_density = false;      // use the analytic f(x0 | z)
  DensityOptions density;
  double ci_level = 0.95;
  int threads = 1;

  void check() const;
  std::vector<int> tracked() const;
};

double theta_star(int item, int n);
Eigen::VectorXd theta_star_vector(int n);  // theta*_1..theta*_n

// Analytic conditional density of x0 given z: N(z'b, 1).
ConditionalDensityFn analytic_density(const SimConfig& config);

struct PairCount {
  ItemId i = 0;
  ItemId j = 0;
  int count = 0;
};

// n_ij ~ Binomial(T, p_ij), p_ij ~ Uniform(p_n, q_n) clipped to (0, 1],
// p_n = 1/sqrt(n), q_n = p_n log n. Pairs with n_ij = 0 are dropped. A
// disconnected draw is retried with a fresh sub-seed (20 attempts).
std::vector<PairCount> sparse_schedule(int n, int T, std::uint64_t seed,
                                       std::optional<double> forced_probability = std::nullopt);

Dataset generate_dataset(const SimConfig& config, std::uint64_t rep_seed);

struct TrackedParameter {
  std::string name;  // theta_<i> or eta_<k>
  double truth = 0.0;
};

std::vector<TrackedParameter> tracked_parameters(const SimConfig& config);

struct ReplicationRecord {
  std::size_t replication = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> estimate;  // aligned with tracked_parameters
  std::vector<double> se;
  std::vector<bool> covered;
  double bandwidth = 0.0;
};

struct MetricRow {
  std::string parameter;
  double truth = 0.0;
  double bias = 0.0;
  std::optional<double> sd;  // absent with fewer than two replications
  double cp = 0.0;
  std::size_t used = 0;
};

struct MetricsTable {
  std::vector<MetricRow> rows;
  std::size_t replications = 0;
  std::size_t failures = 0;
};

struct MonteCarloResult {
  SimConfig config;
  std::vector<TrackedParameter> parameters;
  std::vector<ReplicationRecord> replications;
  MetricsTable table;
};

// Aggregates bias, SD and CP in replication order from the stored records.
MetricsTable aggregate(const std::vector<TrackedParameter>& parameters,
                       const std::vector<ReplicationRecord>& replications);

// Throws Error when more than 10% of replications fail.
MonteCarloResult run_monte_carlo(const SimConfig& config);

struct ComparisonRow {
  std::string parameter;
  double truth = 0.0;
  double semiparametric_bias = 0.0;
  double mle_bias = 0.0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::size_t replications = 0;
  std::size_t semiparametric_failures = 0;
  std::size_t mle_failures = 0;  // separation or non-convergence, excluded
};

ComparisonTable compare_estimators(const SimConfig& config);

struct QQData {
  std::string parameter;
  std::vector<double> sample;       // standardized, ascending
  std::vector<double> theoretical;  // normal quantiles at (k - 0.5) / R
  bool degenerate = false;
};

QQData qq_from_values(std::string parameter, std::vector<double> values);
QQData qq_export(const MonteCarloResult& result, const std::string& parameter);

}  // namespace pcrank
