#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pcrank/dataset.hpp"
#include "pcrank/estimator.hpp"
#include "pcrank/simulation.hpp"

namespace pcrank {

// Shortest round-trip decimal, locale independent ("NA" for NaN).
std::string format_double(double value);
double parse_double(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct MatchRow {
  std::string date;  // YYYY-MM-DD
  std::string home;
  std::string away;
  int home_won = 0;
  std::map<std::string, double> extra;
  std::size_t line = 0;
};

std::vector<MatchRow> read_matches(const std::filesystem::path& path);

// Item label -> projected win share, used before any in-season month exists.
std::map<std::string, double> read_projections(const std::filesystem::path& path);

struct FeatureOptions {
  bool home_field = true;      // column "home"
  bool back_to_back = true;    // column "b2b"
  bool rolling_win_share = true;  // column "win_share_diff"
  std::optional<std::map<std::string, double>> projections;
};

// Adds sports-style covariates to each match, oriented from the home team:
//   home = +1 (the home team is the head of the stored row);
//   b2b = -1 when the away team plays its second away game on consecutive
//         days (+1 from the away team's side), 0 otherwise;
//   win_share_diff = W_home - W_away with W the team's win share in the
//         latest earlier calendar month it played (projections before that).
// Matches are processed in date order.
void build_features(std::vector<MatchRow>& matches, const FeatureOptions& options);

struct SchemaSpec {
  std::string special;  // column used as x0
  std::vector<std::string> covariates;
  std::vector<bool> continuous;
  int special_sign = 1;
};

// "home:discrete,b2b:discrete,rest:continuous" (type defaults to continuous).
SchemaSpec parse_schema(const std::string& text, const std::string& special, int sign);

struct IngestedData {
  Dataset dataset;
  std::vector<std::string> labels;  // label of item id 0..n
};

// Items are registered on first sight; the reference item (default: the
// alphabetically first label) becomes item 0, the rest follow in label order.
// Occasions are numbered per pair in date order.
IngestedData ingest_matches(const std::vector<MatchRow>& matches, const SchemaSpec& schema,
                            const std::optional<std::string>& reference = std::nullopt);
IngestedData ingest(const std::filesystem::path& path, const SchemaSpec& schema,
                    const std::optional<std::string>& reference = std::nullopt);

// Canonical record format: head,tail,occasion,outcome,<special>,<covariates>
// with integer item ids. Item count is max id + 1 unless `n_plus_1` is given.
void write_records(std::ostream& out, const Dataset& dataset);
Dataset read_records(const std::filesystem::path& path, const SchemaSpec& schema,
                     std::optional<int> n_plus_1 = std::nullopt);
bool is_records_file(const std::filesystem::path& path);
void write_items(std::ostream& out, const std::vector<std::string>& labels);

enum class ReportFormat { table, keyvalue };

void write_estimates(std::ostream& out, const EstimateReport& report, const ColumnSchema& schema,
                     const std::vector<std::string>& labels);
void write_ranks(std::ostream& out, const EstimateReport& report,
                 const std::vector<std::string>& labels);
void write_report_keyvalue(std::ostream& out, const EstimateReport& report,
                           const ColumnSchema& schema, const std::vector<std::string>& labels);
// Aligned plain-text rendering of the same content.
void write_report_table(std::ostream& out, const EstimateReport& report,
                        const ColumnSchema& schema, const std::vector<std::string>& labels);
void write_diagnostics(std::ostream& out, const EstimateReport& report);

void write_metrics(std::ostream& out, const MetricsTable& table);
void write_replications(std::ostream& out, const MonteCarloResult& result);
void write_comparison(std::ostream& out, const ComparisonTable& table);
void write_qq(std::ostream& out, const QQData& qq);
void write_bandwidth_trace(std::ostream& out, const BandwidthSelection& selection);
void write_sign_check(std::ostream& out, const SignCheck& check);

}  // namespace pcrank
