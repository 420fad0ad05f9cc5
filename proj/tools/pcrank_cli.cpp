#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pcrank/bt_baseline.hpp"
#include "pcrank/error.hpp"
#include "pcrank/estimator.hpp"
#include "pcrank/io.hpp"
#include "pcrank/parallel.hpp"
#include "pcrank/simulation.hpp"

namespace fs = std::filesystem;
using namespace pcrank;

namespace {

struct InputArgs {
  std::string input;
  std::string schema;
  std::string special = "x0";
  std::string sign = "+1";
  std::string features;
  std::string projections;
  std::string reference;
  int buckets = 10;
};

struct FitArgs {
  std::string bandwidth = "auto";
  double floor = 0.01;
  double level = 0.95;
  bool weight_by_count = false;
  bool general = false;
};

struct SimArgs {
  int n = 50;
  int T = 3;
  std::string noise = "gauss";
  int reps = 100;
  std::uint64_t seed = 20240601;
  std::string bandwidth = "auto";
  double floor = 0.01;
  double level = 0.95;
  bool sparse = false;
  bool oracle = false;
  bool z_per_pair = false;
  std::string parameter = "eta_1";
};

struct Common {
  std::string out = ".";
  std::string format = "table";
  int threads = 0;
};

struct Loaded {
  Dataset dataset;
  std::vector<std::string> labels;
};

int parse_sign_flag(const std::string& text) {
  if (text == "+1" || text == "1") return 1;
  if (text == "-1") return -1;
  if (text == "auto") return 0;
  throw InputError("--sign must be +1, -1 or auto");
}

std::optional<double> parse_bandwidth_flag(const std::string& text) {
  if (text == "auto") return std::nullopt;
  const double h = parse_double(text);
  if (!(h > 0.0)) throw InputError("--bandwidth must be positive or 'auto'");
  return h;
}

Loaded load(const InputArgs& args, int sign) {
  std::string special = args.special;
  std::string schema_text = args.schema;
  if (args.features == "nba") {
    if (special == "x0") special = "win_share_diff";
    if (schema_text.empty()) schema_text = "home:discrete,b2b:discrete";
  } else if (!args.features.empty()) {
    throw InputError("unknown feature set '" + args.features + "' (supported: nba)");
  }
  const SchemaSpec schema = parse_schema(schema_text, special, sign == 0 ? 1 : sign);

  if (is_records_file(args.input)) {
    Dataset ds = read_records(args.input, schema);
    std::vector<std::string> labels;
    for (int k = 0; k < ds.n_plus_1(); ++k) labels.push_back(std::to_string(k));
    return {std::move(ds), std::move(labels)};
  }
  auto matches = read_matches(args.input);
  if (args.features == "nba") {
    FeatureOptions fo;
    if (!args.projections.empty()) fo.projections = read_projections(args.projections);
    build_features(matches, fo);
  }
  std::optional<std::string> reference;
  if (!args.reference.empty()) reference = args.reference;
  auto ingested = ingest_matches(matches, schema, reference);
  return {std::move(ingested.dataset), std::move(ingested.labels)};
}

Loaded load_with_sign(const InputArgs& args, std::optional<SignCheck>* check = nullptr) {
  const int sign = parse_sign_flag(args.sign);
  Loaded loaded = load(args, sign);
  if (sign == 0) {
    SignCheck sc = trend_sign_check(loaded.dataset, args.buckets);
    std::cerr << "sign-check: special_sign=" << sc.sign
              << (sc.low_confidence ? " (low confidence)" : "") << '\n';
    loaded.dataset = loaded.dataset.with_special_sign(sc.sign);
    if (check) *check = std::move(sc);
  }
  return loaded;
}

class Artifacts {
 public:
  explicit Artifacts(const std::string& dir) : dir_(dir) { fs::create_directories(dir_); }

  template <class Writer>
  void write(const std::string& name, Writer&& writer) {
    const fs::path path = dir_ / name;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    writer(out);
    out.flush();
    if (!out) throw InputError("failed while writing " + path.string());
    std::cout << "wrote " << path.string() << '\n';
  }

 private:
  fs::path dir_;
};

int thread_count(const Common& c) { return c.threads > 0 ? c.threads : default_thread_count(); }

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--format", c.format, "Report format")
      ->check(CLI::IsMember({"table", "keyvalue"}))
      ->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads (0: hardware)");
  sub->set_config("--config", "", "Flat key=value config file (flags override)");
}

void add_input(CLI::App* sub, InputArgs& a) {
  sub->add_option("--input", a.input, "Match file or records file")->required()->check(
      CLI::ExistingFile);
  sub->add_option("--schema", a.schema, "Covariates, e.g. home:discrete,rest:continuous");
  sub->add_option("--special", a.special, "Special regressor column")->capture_default_str();
  sub->add_option("--sign", a.sign, "Special regressor sign {+1,-1,auto}")->capture_default_str();
  sub->add_option("--features", a.features, "Derived feature set (nba)");
  sub->add_option("--projections", a.projections, "Item,win_share projection file")
      ->check(CLI::ExistingFile);
  sub->add_option("--reference", a.reference, "Label of the reference item");
  sub->add_option("--buckets", a.buckets, "Buckets for the sign check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_sim(CLI::App* sub, SimArgs& s) {
  sub->add_option("--n", s.n, "Items are 0..n")->capture_default_str();
  sub->add_option("--T", s.T, "Comparisons per pair")->capture_default_str();
  sub->add_option("--noise", s.noise, "gauss, logistic_unit_var, mix_norm, logistic_standard")
      ->capture_default_str();
  sub->add_option("--reps", s.reps, "Replications")->capture_default_str();
  sub->add_option("--seed", s.seed, "Root seed")->capture_default_str();
  sub->add_option("--bandwidth", s.bandwidth, "auto or a fixed h")->capture_default_str();
  sub->add_option("--floor", s.floor, "Density floor")->capture_default_str();
  sub->add_option("--level", s.level, "Confidence level")->capture_default_str();
  sub->add_flag("--sparse", s.sparse, "Random sparse schedule");
  sub->add_flag("--oracle", s.oracle, "Use the analytic conditional density");
  sub->add_flag("--z-per-pair", s.z_per_pair, "Draw covariates once per pair");
}

SimConfig sim_config(const SimArgs& s, const Common& c) {
  SimConfig cfg;
  cfg.n = s.n;
  cfg.T = s.T;
  cfg.noise = parse_noise(s.noise);
  cfg.reps = s.reps;
  cfg.seed = s.seed;
  cfg.bandwidth = parse_bandwidth_flag(s.bandwidth);
  cfg.density.floor = s.floor;
  cfg.ci_level = s.level;
  cfg.sparse = s.sparse;
  cfg.oracle_density = s.oracle;
  cfg.covariates_per_pair = s.z_per_pair;
  cfg.threads = thread_count(c);
  cfg.check();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiparametric ranking from paired comparisons"};
  app.require_subcommand(1);

  Common common;
  InputArgs input;
  FitArgs fit_args;
  SimArgs sim;

  auto* fit_cmd = app.add_subcommand("fit", "Estimate merits and covariate effects");
  add_common(fit_cmd, common);
  add_input(fit_cmd, input);
  fit_cmd->add_option("--bandwidth", fit_args.bandwidth, "auto or a fixed h")
      ->capture_default_str();
  fit_cmd->add_option("--floor", fit_args.floor, "Density floor")->capture_default_str();
  fit_cmd->add_option("--level", fit_args.level, "Confidence level")->capture_default_str();
  fit_cmd->add_flag("--weight-by-count", fit_args.weight_by_count, "Weight pairs by count");
  fit_cmd->add_flag("--general", fit_args.general, "Force the iterative solver path");

  auto* bw_cmd = app.add_subcommand("bandwidth", "Bandwidth criterion trace");
  add_common(bw_cmd, common);
  add_input(bw_cmd, input);
  bw_cmd->add_option("--floor", fit_args.floor, "Density floor")->capture_default_str();

  auto* sign_cmd = app.add_subcommand("sign-check", "Win rate by special regressor bucket");
  add_common(sign_cmd, common);
  add_input(sign_cmd, input);

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo bias, SD and coverage");
  add_common(sim_cmd, common);
  add_sim(sim_cmd, sim);

  auto* cmp_cmd = app.add_subcommand("compare", "Semiparametric vs Bradley-Terry bias");
  add_common(cmp_cmd, common);
  add_sim(cmp_cmd, sim);

  auto* qq_cmd = app.add_subcommand("qq", "Standardized estimates vs normal quantiles");
  add_common(qq_cmd, common);
  add_sim(qq_cmd, sim);
  qq_cmd->add_option("--parameter", sim.parameter, "theta_<i> or eta_<k>")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    Artifacts artifacts(common.out);
    if (fit_cmd->parsed()) {
      std::optional<SignCheck> check;
      const Loaded data = load_with_sign(input, &check);
      const ColumnSchema& schema = data.dataset.schema();
      FitOptions opts;
      opts.bandwidth = parse_bandwidth_flag(fit_args.bandwidth);
      opts.density.floor = fit_args.floor;
      opts.density.threads = thread_count(common);
      opts.ci_level = fit_args.level;
      opts.weight_by_count = fit_args.weight_by_count;
      opts.force_general = fit_args.general;
      const EstimateReport report = fit(data.dataset, opts);

      artifacts.write("report.txt", [&](std::ostream& out) {
        if (common.format == "keyvalue") {
          write_report_keyvalue(out, report, schema, data.labels);
        } else {
          write_report_table(out, report, schema, data.labels);
        }
      });
      artifacts.write("estimates.csv",
                      [&](std::ostream& out) { write_estimates(out, report, schema, data.labels); });
      artifacts.write("ranks.csv", [&](std::ostream& out) { write_ranks(out, report, data.labels); });
      artifacts.write("diagnostics.csv", [&](std::ostream& out) { write_diagnostics(out, report); });
      if (check) {
        artifacts.write("sign_check.csv", [&](std::ostream& out) { write_sign_check(out, *check); });
      }
      if (!report.diagnostics.bandwidth_grid.empty()) {
        BandwidthSelection trace;
        trace.bandwidth = report.diagnostics.bandwidth;
        trace.grid = report.diagnostics.bandwidth_grid;
        trace.criterion = report.diagnostics.bandwidth_criterion;
        artifacts.write("bandwidth.csv",
                        [&](std::ostream& out) { write_bandwidth_trace(out, trace); });
      }
    } else if (bw_cmd->parsed()) {
      const Loaded data = load_with_sign(input);
      DensityOptions dopt;
      dopt.floor = fit_args.floor;
      dopt.threads = thread_count(common);
      const auto selection = select_bandwidth(data.dataset, default_bandwidth_grid(data.dataset),
                                              default_deltas(), dopt);
      artifacts.write("bandwidth.csv",
                      [&](std::ostream& out) { write_bandwidth_trace(out, selection); });
      std::cout << "selected bandwidth " << format_double(selection.bandwidth) << '\n';
    } else if (sign_cmd->parsed()) {
      InputArgs args = input;
      args.sign = "+1";
      const Loaded data = load(args, 1);
      const SignCheck check = trend_sign_check(data.dataset, input.buckets);
      artifacts.write("sign_check.csv", [&](std::ostream& out) { write_sign_check(out, check); });
      std::cout << "recommended special_sign " << (check.sign > 0 ? "+1" : "-1")
                << (check.low_confidence ? " (low confidence)" : "") << '\n';
    } else if (sim_cmd->parsed()) {
      const MonteCarloResult result = run_monte_carlo(sim_config(sim, common));
      artifacts.write("metrics.csv", [&](std::ostream& out) { write_metrics(out, result.table); });
      artifacts.write("replications.csv",
                      [&](std::ostream& out) { write_replications(out, result); });
      if (result.table.failures > 0) {
        std::cerr << result.table.failures << " replication(s) failed\n";
      }
    } else if (cmp_cmd->parsed()) {
      const ComparisonTable table = compare_estimators(sim_config(sim, common));
      artifacts.write("comparison.csv", [&](std::ostream& out) { write_comparison(out, table); });
    } else if (qq_cmd->parsed()) {
      const MonteCarloResult result = run_monte_carlo(sim_config(sim, common));
      const QQData qq = qq_export(result, sim.parameter);
      artifacts.write("qq.csv", [&](std::ostream& out) { write_qq(out, qq); });
      if (qq.degenerate) std::cerr << "warning: constant estimates, QQ data is degenerate\n";
    }
  } catch (const pcrank::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
