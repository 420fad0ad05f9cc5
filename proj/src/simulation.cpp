#include "pcrank/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pcrank/bt_baseline.hpp"
#include "pcrank/design.hpp"
#include "pcrank/error.hpp"
#include "pcrank/estimator.hpp"
#include "pcrank/parallel.hpp"

namespace pcrank {

NoiseKind parse_noise(const std::string& name) {
  if (name == "gauss") return NoiseKind::gauss;
  if (name == "logistic_unit_var") return NoiseKind::logistic_unit_var;
  if (name == "mix_norm") return NoiseKind::mix_norm;
  if (name == "logistic_standard") return NoiseKind::logistic_standard;
  throw InputError("unknown noise '" + name +
                   "' (gauss, logistic_unit_var, mix_norm, logistic_standard)");
}

std::string noise_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gauss: return "gauss";
    case NoiseKind::logistic_unit_var: return "logistic_unit_var";
    case NoiseKind::mix_norm: return "mix_norm";
    case NoiseKind::logistic_standard: return "logistic_standard";
  }
  return "gauss";
}

namespace {

double sample_logistic(double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return scale * std::log(u / (1.0 - u));
}

}  // namespace

double sample_noise(NoiseKind kind, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (kind) {
    case NoiseKind::gauss:
      return normal(rng);
    case NoiseKind::logistic_unit_var:
      return sample_logistic(std::sqrt(3.0) / std::numbers::pi, rng);
    case NoiseKind::logistic_standard:
      return sample_logistic(1.0, rng);
    case NoiseKind::mix_norm: {
      // 0.75 N(-0.3, 0.91) + 0.25 N(0.9, 0.19): mean 0, variance 1.
      std::bernoulli_distribution first(0.75);
      if (first(rng)) return -0.3 + std::sqrt(0.91) * normal(rng);
      return 0.9 + std::sqrt(0.19) * normal(rng);
    }
  }
  return 0.0;
}

std::uint64_t mix_seed(std::uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix_seed(root + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

void SimConfig::check() const {
  if (n < 2) throw InputError("simulation needs n >= 2");
  if (T < 1) throw InputError("simulation needs T >= 1");
  if (reps < 0) throw InputError("replication count must be nonnegative");
  Eigen::LLT<Eigen::Matrix2d> llt(z_cov);
  if (llt.info() != Eigen::Success) throw InputError("covariate covariance must be positive definite");
  for (int i : tracked())
    if (i < 1 || i > n) throw InputError("tracked item out of range");
}

std::vector<int> SimConfig::tracked() const {
  if (!tracked_items.empty()) return tracked_items;
  if (n == 50) return {1, 12, 25, 37, 50};
  if (n == 100) return {1, 25, 50, 75, 100};
  std::vector<int> out{1, std::max(1, n / 4), std::max(1, n / 2), std::max(1, (3 * n) / 4), n};
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double theta_star(int item, int n) {
  return 0.2 * item * std::log(static_cast<double>(n)) / n;
}

Eigen::VectorXd theta_star_vector(int n) {
  Eigen::VectorXd theta(n);
  for (int i = 1; i <= n; ++i) theta(i - 1) = theta_star(i, n);
  return theta;
}

ConditionalDensityFn analytic_density(const SimConfig& config) {
  const Eigen::Vector2d b = config.b;
  return [b](double x0, const Eigen::VectorXd& z) {
    const double u = x0 - z.dot(b);
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  };
}

std::vector<PairCount> sparse_schedule(int n, int T, std::uint64_t seed,
                                       std::optional<double> forced_probability) {
  if (T < 1) throw InputError("sparse schedule needs T >= 1");
  if (n < 4) throw InputError("sparse schedule needs n >= 4");
  const double p_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double q_n = p_n * std::log(static_cast<double>(n));

  for (int attempt = 0; attempt < 20; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> unif(p_n, q_n);
    std::vector<PairCount> schedule;
    std::vector<std::pair<ItemId, ItemId>> pairs;
    for (ItemId i = 0; i < n; ++i) {
      for (ItemId j = i + 1; j <= n; ++j) {
        const double prob =
            forced_probability ? *forced_probability : std::min(1.0, unif(rng));
        std::binomial_distribution<int> draw(T, std::clamp(prob, 0.0, 1.0));
        const int count = draw(rng);
        if (count > 0) {
          schedule.push_back({i, j, count});
          pairs.emplace_back(i, j);
        }
      }
    }
    try {
      (void)DesignOperator::general(n, std::move(pairs));
      return schedule;
    } catch (const IdentifiabilityError&) {
      // fresh sub-seed
    }
  }
  throw IdentifiabilityError("sparse schedule stayed disconnected after 20 attempts");
}

Dataset generate_dataset(const SimConfig& config, std::uint64_t rep_seed) {
  config.check();
  std::vector<PairCount> schedule;
  if (config.sparse) {
    schedule = sparse_schedule(config.n, config.T, derive_seed(rep_seed, 1),
                               config.forced_pair_probability);
  } else {
    for (ItemId i = 0; i < config.n; ++i)
      for (ItemId j = i + 1; j <= config.n; ++j) schedule.push_back({i, j, config.T});
  }

  const Eigen::Matrix2d chol = Eigen::LLT<Eigen::Matrix2d>(config.z_cov).matrixL();
  std::mt19937_64 rng(derive_seed(rep_seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ComparisonRecord> records;
  std::size_t total = 0;
  for (const auto& pc : schedule) total += static_cast<std::size_t>(pc.count);
  records.reserve(total);

  // Each unordered pair is drawn once in canonical orientation; the mirror is
  // implied, so a_ji = 1 - a_ij and X_ji = -X_ij hold by construction.
  for (const auto& pc : schedule) {
    const double merit_gap = theta_star(pc.i, config.n) - theta_star(pc.j, config.n);
    Eigen::Vector2d z = Eigen::Vector2d::Zero();
    for (int t = 1; t <= pc.count; ++t) {
      if (t == 1 || !config.covariates_per_pair) {
        const Eigen::Vector2d std_normal(normal(rng), normal(rng));
        z = chol * std_normal;
      }
      const double x0 = z.dot(config.b) + normal(rng);
      const double eps = sample_noise(config.noise, rng);
      ComparisonRecord r;
      r.head = pc.i;
      r.tail = pc.j;
      r.occasion = t;
      r.x0 = x0;
      r.z = z;
      r.outcome = merit_gap + x0 + z.dot(config.eta_star) > eps ? 1 : 0;
      records.push_back(std::move(r));
    }
  }
  return Dataset(config.n + 1, ColumnSchema::all_continuous(2), std::move(records));
}

std::vector<TrackedParameter> tracked_parameters(const SimConfig& config) {
  std::vector<TrackedParameter> out;
  for (int i : config.tracked()) out.push_back({"theta_" + std::to_string(i), theta_star(i, config.n)});
  for (int k = 0; k < 2; ++k) out.push_back({"eta_" + std::to_string(k + 1), config.eta_star(k)});
  return out;
}

namespace {

FitOptions fit_options(const SimConfig& config) {
  FitOptions options;
  options.bandwidth = config.bandwidth;
  options.density = config.density;
  options.density.threads = 1;  // parallelism lives at the replication level
  options.ci_level = config.ci_level;
  if (config.oracle_density) options.oracle_density = analytic_density(config);
  return options;
}

ReplicationRecord run_replication(const SimConfig& config,
                                  const std::vector<TrackedParameter>& params,
                                  const std::vector<int>& tracked, std::size_t rep) {
  ReplicationRecord out;
  out.replication = rep;
  try {
    const Dataset data = generate_dataset(config, derive_seed(config.seed, rep));
    const EstimateReport report = fit(data, fit_options(config));
    out.bandwidth = report.diagnostics.bandwidth;
    for (std::size_t k = 0; k < params.size(); ++k) {
      double est = 0.0;
      double se = 0.0;
      if (k < tracked.size()) {
        est = report.theta_hat(tracked[k] - 1);
        se = report.se_theta(tracked[k] - 1);
      } else {
        const auto idx = static_cast<Eigen::Index>(k - tracked.size());
        est = report.eta_hat(idx);
        se = report.se_eta(idx);
      }
      const double z = normal_quantile(0.5 + 0.5 * config.ci_level);
      out.estimate.push_back(est);
      out.se.push_back(se);
      out.covered.push_back(std::abs(est - params[k].truth) <= z * se);
    }
  } catch (const Error& e) {
    out.failed = true;
    out.failure = e.what();
  }
  return out;
}

}  // namespace

MetricsTable aggregate(const std::vector<TrackedParameter>& parameters,
                       const std::vector<ReplicationRecord>& replications) {
  MetricsTable table;
  table.replications = replications.size();
  for (const auto& r : replications) table.failures += r.failed ? 1 : 0;
  for (std::size_t k = 0; k < parameters.size(); ++k) {
    MetricRow row;
    row.parameter = parameters[k].name;
    row.truth = parameters[k].truth;
    double sum = 0.0;
    double hits = 0.0;
    for (const auto& r : replications) {
      if (r.failed) continue;
      sum += r.estimate[k];
      hits += r.covered[k] ? 1.0 : 0.0;
      ++row.used;
    }
    if (row.used > 0) {
      const double mean = sum / static_cast<double>(row.used);
      row.bias = mean - row.truth;
      row.cp = hits / static_cast<double>(row.used);
      if (row.used > 1) {
        double ss = 0.0;
        for (const auto& r : replications)
          if (!r.failed) ss += (r.estimate[k] - mean) * (r.estimate[k] - mean);
        row.sd = std::sqrt(ss / static_cast<double>(row.used - 1));
      }
    }
    table.rows.push_back(row);
  }
  return table;
}

MonteCarloResult run_monte_carlo(const SimConfig& config) {
  config.check();
  MonteCarloResult result;
  result.config = config;
  result.parameters = tracked_parameters(config);
  const auto tracked = config.tracked();
  const auto reps = static_cast<std::size_t>(config.reps);
  result.replications.resize(reps);
  parallel_blocks(reps, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t rep = begin; rep < end; ++rep)
      result.replications[rep] = run_replication(config, result.parameters, tracked, rep);
  });
  result.table = aggregate(result.parameters, result.replications);
  if (reps > 0 && 10 * result.table.failures > reps) {
    std::string first;
    for (const auto& r : result.replications)
      if (r.failed) {
        first = r.failure;
        break;
      }
    throw Error(std::to_string(result.table.failures) + " of " + std::to_string(reps) +
                " replications failed (more than 10%); first failure: " + first);
  }
  return result;
}

ComparisonTable compare_estimators(const SimConfig& config) {
  config.check();
  const auto params = tracked_parameters(config);
  const auto tracked = config.tracked();
  const auto reps = static_cast<std::size_t>(config.reps);

  struct Outcome {
    bool semi_ok = false;
    bool mle_ok = false;
    std::vector<double> semi;
    std::vector<double> mle;
  };
  std::vector<Outcome> outcomes(reps);
  parallel_blocks(reps, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t rep = begin; rep < end; ++rep) {
      auto& o = outcomes[rep];
      const Dataset data = generate_dataset(config, derive_seed(config.seed, rep));
      auto pick = [&](const Eigen::VectorXd& theta, const Eigen::VectorXd& eta) {
        std::vector<double> v;
        for (int i : tracked) v.push_back(theta(i - 1));
        for (Eigen::Index k = 0; k < eta.size(); ++k) v.push_back(eta(k));
        return v;
      };
      try {
        const auto report = fit(data, fit_options(config));
        o.semi = pick(report.theta_hat, report.eta_hat);
        o.semi_ok = true;
      } catch (const Error&) {
      }
      try {
        const auto mle = fit_bt_mle(data);
        if (mle.converged) {
          o.mle = pick(mle.theta_mle, mle.eta_mle);
          o.mle_ok = true;
        }
      } catch (const Error&) {
      }
    }
  });

  ComparisonTable table;
  table.replications = reps;
  for (const auto& o : outcomes) {
    table.semiparametric_failures += o.semi_ok ? 0 : 1;
    table.mle_failures += o.mle_ok ? 0 : 1;
  }
  if (reps == 0) return table;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ComparisonRow row;
    row.parameter = params[k].name;
    row.truth = params[k].truth;
    double semi_sum = 0.0;
    double mle_sum = 0.0;
    std::size_t semi_n = 0;
    std::size_t mle_n = 0;
    for (const auto& o : outcomes) {
      if (o.semi_ok) {
        semi_sum += o.semi[k];
        ++semi_n;
      }
      if (o.mle_ok) {
        mle_sum += o.mle[k];
        ++mle_n;
      }
    }
    row.semiparametric_bias =
        semi_n ? semi_sum / static_cast<double>(semi_n) - row.truth : std::nan("");
    row.mle_bias = mle_n ? mle_sum / static_cast<double>(mle_n) - row.truth : std::nan("");
    table.rows.push_back(row);
  }
  return table;
}

QQData qq_from_values(std::string parameter, std::vector<double> values) {
  if (values.size() < 10) throw InputError("QQ export needs at least 10 replications");
  QQData qq;
  qq.parameter = std::move(parameter);
  const double count = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (count - 1.0));
  qq.degenerate = !(sd > 0.0);
  std::sort(values.begin(), values.end());
  for (std::size_t k = 0; k < values.size(); ++k) {
    qq.sample.push_back(qq.degenerate ? 0.0 : (values[k] - mean) / sd);
    qq.theoretical.push_back(normal_quantile((static_cast<double>(k) + 0.5) / count));
  }
  return qq;
}

QQData qq_export(const MonteCarloResult& result, const std::string& parameter) {
  std::size_t index = result.parameters.size();
  for (std::size_t k = 0; k < result.parameters.size(); ++k)
    if (result.parameters[k].name == parameter) index = k;
  if (index == result.parameters.size()) throw InputError("unknown parameter '" + parameter + "'");
  std::vector<double> values;
  for (const auto& r : result.replications)
    if (!r.failed) values.push_back(r.estimate[index]);
  return qq_from_values(parameter, std::move(values));
}

}  // namespace pcrank
