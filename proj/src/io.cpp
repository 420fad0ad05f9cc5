#include "pcrank/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "pcrank/error.hpp"

namespace pcrank {

namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::size_t column_index(const CsvTable& table, const std::string& name,
                         const std::filesystem::path& path) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) {
    throw InputError(path.string() + ": missing column '" + name + "'");
  }
  return static_cast<std::size_t>(it - table.header.begin());
}

std::chrono::sys_days parse_date(const std::string& text, std::size_t line) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char dash1 = 0;
  char dash2 = 0;
  std::istringstream in(text);
  in >> y >> dash1 >> m >> dash2 >> d;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!in || dash1 != '-' || dash2 != '-' || !ymd.ok() || text.size() != 10) {
    throw InputError("line " + std::to_string(line) + ": unparseable date '" + text + "'");
  }
  return std::chrono::sys_days{ymd};
}

int parse_int(const std::string& text, std::size_t line, const char* what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError("line " + std::to_string(line) + ": bad " + what + " '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t == "NA" || t == "nan") return std::nan("");
  double value = 0.0;
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InputError("not a number: '" + text + "'");
  }
  return value;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split(t, ',');
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InputError(path.string() + ": line " + std::to_string(number) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(number);
  }
  return table;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) out << (k ? "," : "") << fields[k];
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
}

std::vector<MatchRow> read_matches(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.rows.empty()) throw InputError(path.string() + ": empty dataset");
  const auto c_date = column_index(table, "date", path);
  const auto c_home = column_index(table, "home", path);
  const auto c_away = column_index(table, "away", path);
  const auto c_won = column_index(table, "home_won", path);
  std::vector<MatchRow> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    MatchRow m;
    m.line = line;
    m.date = row[c_date];
    (void)parse_date(m.date, line);
    m.home = row[c_home];
    m.away = row[c_away];
    if (m.home.empty() || m.away.empty()) {
      throw InputError("line " + std::to_string(line) + ": empty team label");
    }
    if (m.home == m.away) {
      throw DegeneratePairError("line " + std::to_string(line) + ": '" + m.home +
                                "' plays itself");
    }
    m.home_won = parse_int(row[c_won], line, "home_won");
    if (m.home_won != 0 && m.home_won != 1) {
      throw InputError("line " + std::to_string(line) + ": home_won must be 0 or 1");
    }
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == c_date || c == c_home || c == c_away || c == c_won) continue;
      try {
        m.extra[table.header[c]] = parse_double(row[c]);
      } catch (const InputError&) {
        throw InputError("line " + std::to_string(line) + ": column '" + table.header[c] +
                         "' is not numeric");
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::map<std::string, double> read_projections(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 2) throw InputError(path.string() + ": expected item,win_share");
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double share = parse_double(table.rows[r][1]);
    if (!(share >= 0.0 && share <= 1.0)) {
      throw InputError(path.string() + ": line " + std::to_string(table.line_numbers[r]) +
                       ": win share must lie in [0, 1]");
    }
    out[table.rows[r][0]] = share;
  }
  return out;
}

void build_features(std::vector<MatchRow>& matches, const FeatureOptions& options) {
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return matches[a].date < matches[b].date; });

  // Monthly tallies per team; only months strictly before a game are used.
  struct Tally {
    double wins = 0.0;
    double games = 0.0;
  };
  std::map<std::string, std::map<std::string, Tally>> monthly;
  for (const auto& m : matches) {
    const std::string month = m.date.substr(0, 7);
    auto& home = monthly[m.home][month];
    auto& away = monthly[m.away][month];
    home.games += 1.0;
    away.games += 1.0;
    home.wins += m.home_won;
    away.wins += 1 - m.home_won;
  }
  auto win_share = [&](const std::string& team, const std::string& month,
                       std::size_t line) -> double {
    const auto& months = monthly[team];
    auto it = months.lower_bound(month);
    if (it != months.begin()) {
      --it;
      return it->second.wins / it->second.games;
    }
    if (!options.projections) {
      throw InputError("line " + std::to_string(line) + ": '" + team +
                       "' has no earlier month; a projection file is required");
    }
    const auto p = options.projections->find(team);
    if (p == options.projections->end()) {
      throw InputError("projection file has no entry for '" + team + "'");
    }
    return p->second;
  };

  struct LastGame {
    std::chrono::sys_days date;
    bool away = false;
  };
  std::map<std::string, LastGame> last;
  for (std::size_t idx : order) {
    auto& m = matches[idx];
    const auto day = parse_date(m.date, m.line);
    if (options.home_field) m.extra["home"] = 1.0;
    if (options.back_to_back) {
      const auto prev = last.find(m.away);
      const bool b2b = prev != last.end() && prev->second.away &&
                       prev->second.date + std::chrono::days{1} == day;
      m.extra["b2b"] = b2b ? -1.0 : 0.0;
    }
    if (options.rolling_win_share) {
      const std::string month = m.date.substr(0, 7);
      m.extra["win_share_diff"] = win_share(m.home, month, m.line) - win_share(m.away, month, m.line);
    }
    // Same-day double entries never count as the "previous day".
    auto update = [&](const std::string& team, bool away) {
      auto it = last.find(team);
      if (it == last.end() || it->second.date < day) last[team] = {day, away};
    };
    update(m.home, false);
    update(m.away, true);
  }
}

SchemaSpec parse_schema(const std::string& text, const std::string& special, int sign) {
  SchemaSpec spec;
  spec.special = special;
  spec.special_sign = sign;
  if (special.empty()) throw InputError("exactly one special column must be designated");
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const std::string name = trim(item.substr(0, colon));
    std::string kind = colon == std::string::npos ? "continuous" : trim(item.substr(colon + 1));
    if (kind != "continuous" && kind != "discrete") {
      throw InputError("column type must be continuous or discrete, got '" + kind + "'");
    }
    if (name == special) throw InputError("special column '" + name + "' listed as a covariate");
    spec.covariates.push_back(name);
    spec.continuous.push_back(kind == "continuous");
  }
  return spec;
}

namespace {

ColumnSchema to_column_schema(const SchemaSpec& spec) {
  ColumnSchema schema;
  schema.names = spec.covariates;
  schema.continuous_mask = spec.continuous;
  schema.special_sign = spec.special_sign;
  schema.special_name = spec.special;
  schema.check();
  return schema;
}

double extra_value(const MatchRow& m, const std::string& column) {
  const auto it = m.extra.find(column);
  if (it == m.extra.end()) {
    throw InputError("line " + std::to_string(m.line) + ": missing column '" + column + "'");
  }
  return it->second;
}

}  // namespace

IngestedData ingest_matches(const std::vector<MatchRow>& matches, const SchemaSpec& schema,
                            const std::optional<std::string>& reference) {
  if (matches.empty()) throw InputError("empty dataset");
  std::set<std::string> seen;
  for (const auto& m : matches) {
    seen.insert(m.home);
    seen.insert(m.away);
  }
  const std::string ref = reference.value_or(*seen.begin());
  if (!seen.contains(ref)) throw InputError("reference item '" + ref + "' never plays");
  std::vector<std::string> labels{ref};
  for (const auto& label : seen)
    if (label != ref) labels.push_back(label);
  std::map<std::string, ItemId> id;
  for (std::size_t k = 0; k < labels.size(); ++k) id[labels[k]] = static_cast<ItemId>(k);

  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return matches[a].date < matches[b].date; });

  std::map<std::pair<ItemId, ItemId>, int> occasions;
  std::vector<ComparisonRecord> records;
  records.reserve(matches.size());
  for (std::size_t idx : order) {
    const auto& m = matches[idx];
    ComparisonRecord r;
    r.head = id.at(m.home);
    r.tail = id.at(m.away);
    r.outcome = m.home_won;
    r.x0 = extra_value(m, schema.special);
    r.z.resize(static_cast<Eigen::Index>(schema.covariates.size()));
    for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
      r.z(static_cast<Eigen::Index>(c)) = extra_value(m, schema.covariates[c]);
    }
    r.occasion = ++occasions[std::minmax(r.head, r.tail)];
    records.push_back(std::move(r));
  }
  return {Dataset(static_cast<int>(labels.size()), to_column_schema(schema), std::move(records)),
          std::move(labels)};
}

IngestedData ingest(const std::filesystem::path& path, const SchemaSpec& schema,
                    const std::optional<std::string>& reference) {
  return ingest_matches(read_matches(path), schema, reference);
}

void write_records(std::ostream& out, const Dataset& dataset) {
  std::vector<std::string> header{"head", "tail", "occasion", "outcome",
                                  dataset.schema().special_name};
  for (const auto& name : dataset.schema().names) header.push_back(name);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(dataset.records().size());
  for (const auto& r : dataset.records()) {
    std::vector<std::string> row{std::to_string(r.head), std::to_string(r.tail),
                                 std::to_string(r.occasion), std::to_string(r.outcome),
                                 format_double(r.x0)};
    for (Eigen::Index k = 0; k < r.z.size(); ++k) row.push_back(format_double(r.z(k)));
    rows.push_back(std::move(row));
  }
  write_csv(out, header, rows);
}

bool is_records_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    return t.rfind("head,tail,occasion,outcome", 0) == 0;
  }
  return false;
}

Dataset read_records(const std::filesystem::path& path, const SchemaSpec& schema,
                     std::optional<int> n_plus_1) {
  const CsvTable table = read_csv(path);
  if (table.rows.empty()) throw InputError(path.string() + ": empty dataset");
  const auto c_head = column_index(table, "head", path);
  const auto c_tail = column_index(table, "tail", path);
  const auto c_occ = column_index(table, "occasion", path);
  const auto c_out = column_index(table, "outcome", path);
  const auto c_x0 = column_index(table, schema.special, path);
  std::vector<std::size_t> c_z;
  for (const auto& name : schema.covariates) c_z.push_back(column_index(table, name, path));

  std::vector<ComparisonRecord> records;
  int max_id = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    ComparisonRecord rec;
    rec.head = parse_int(row[c_head], line, "head");
    rec.tail = parse_int(row[c_tail], line, "tail");
    rec.occasion = parse_int(row[c_occ], line, "occasion");
    rec.outcome = parse_int(row[c_out], line, "outcome");
    rec.x0 = parse_double(row[c_x0]);
    rec.z.resize(static_cast<Eigen::Index>(c_z.size()));
    for (std::size_t k = 0; k < c_z.size(); ++k) {
      rec.z(static_cast<Eigen::Index>(k)) = parse_double(row[c_z[k]]);
    }
    max_id = std::max({max_id, rec.head, rec.tail});
    records.push_back(std::move(rec));
  }
  return Dataset(n_plus_1.value_or(max_id + 1), to_column_schema(schema), std::move(records));
}

void write_items(std::ostream& out, const std::vector<std::string>& labels) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < labels.size(); ++k) rows.push_back({std::to_string(k), labels[k]});
  write_csv(out, {"item", "label"}, rows);
}

namespace {

std::string label_of(const std::vector<std::string>& labels, std::size_t item) {
  return item < labels.size() ? labels[item] : std::to_string(item);
}

struct EstimateLine {
  std::string parameter;
  std::string label;
  double estimate;
  double se;
  Interval ci;
  double p_value;
};

std::vector<EstimateLine> estimate_lines(const EstimateReport& report, const ColumnSchema& schema,
                                         const std::vector<std::string>& labels) {
  std::vector<EstimateLine> out;
  for (Eigen::Index i = 0; i < report.theta_hat.size(); ++i) {
    out.push_back({"theta_" + std::to_string(i + 1),
                   label_of(labels, static_cast<std::size_t>(i + 1)), report.theta_hat(i),
                   report.se_theta(i), report.ci_theta[static_cast<std::size_t>(i)],
                   std::nan("")});
  }
  for (Eigen::Index k = 0; k < report.eta_hat.size(); ++k) {
    const auto name = static_cast<std::size_t>(k) < schema.names.size()
                          ? schema.names[static_cast<std::size_t>(k)]
                          : "z" + std::to_string(k + 1);
    out.push_back({"eta_" + std::to_string(k + 1), name, report.eta_hat(k), report.se_eta(k),
                   report.ci_eta[static_cast<std::size_t>(k)], report.p_eta(k)});
  }
  return out;
}

}  // namespace

void write_estimates(std::ostream& out, const EstimateReport& report, const ColumnSchema& schema,
                     const std::vector<std::string>& labels) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : estimate_lines(report, schema, labels)) {
    rows.push_back({e.parameter, e.label, format_double(e.estimate), format_double(e.se),
                    format_double(e.ci.lower), format_double(e.ci.upper),
                    format_double(e.p_value)});
  }
  write_csv(out, {"parameter", "label", "estimate", "se", "ci_lower", "ci_upper", "p_value"},
            rows);
}

void write_ranks(std::ostream& out, const EstimateReport& report,
                 const std::vector<std::string>& labels) {
  std::vector<std::size_t> order(report.ranks.size());
  for (std::size_t item = 0; item < report.ranks.size(); ++item) {
    order[static_cast<std::size_t>(report.ranks[item] - 1)] = item;
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t item : order) {
    const double theta = item == 0 ? 0.0 : report.theta_hat(static_cast<Eigen::Index>(item - 1));
    rows.push_back({std::to_string(report.ranks[item]), std::to_string(item),
                    label_of(labels, item), format_double(theta)});
  }
  write_csv(out, {"rank", "item", "label", "theta"}, rows);
}

void write_report_keyvalue(std::ostream& out, const EstimateReport& report,
                           const ColumnSchema& schema, const std::vector<std::string>& labels) {
  const auto& d = report.diagnostics;
  out << "ci_level=" << format_double(report.ci_level) << '\n'
      << "bandwidth=" << format_double(d.bandwidth) << '\n'
      << "lambda_min=" << format_double(d.lambda_min) << '\n'
      << "floor_hits=" << d.floor_hits << '\n'
      << "closed_form=" << (d.closed_form ? "true" : "false") << '\n'
      << "variance_plugin=" << d.variance_plugin << '\n'
      << "variance_unreliable=" << (d.variance_unreliable ? "true" : "false") << '\n'
      << "special=" << schema.special_name << '\n'
      << "special_sign=" << schema.special_sign << '\n';
  for (const auto& e : estimate_lines(report, schema, labels)) {
    const std::string key = e.parameter + "[" + e.label + "]";
    out << key << ".estimate=" << format_double(e.estimate) << '\n'
        << key << ".se=" << format_double(e.se) << '\n'
        << key << ".ci_lower=" << format_double(e.ci.lower) << '\n'
        << key << ".ci_upper=" << format_double(e.ci.upper) << '\n';
    if (!std::isnan(e.p_value)) out << key << ".p_value=" << format_double(e.p_value) << '\n';
  }
  for (std::size_t item = 0; item < report.ranks.size(); ++item) {
    out << "rank[" << label_of(labels, item) << "]=" << report.ranks[item] << '\n';
  }
}

void write_report_table(std::ostream& out, const EstimateReport& report,
                        const ColumnSchema& schema, const std::vector<std::string>& labels) {
  const auto lines = estimate_lines(report, schema, labels);
  std::size_t width = 9;
  for (const auto& e : lines) width = std::max(width, e.label.size());
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(12) << "parameter" << std::setw(static_cast<int>(width) + 2)
      << "label" << std::right << std::setw(10) << "estimate" << std::setw(10) << "se"
      << std::setw(22) << "CI" << std::setw(10) << "p" << '\n';
  for (const auto& e : lines) {
    std::ostringstream ci;
    ci << std::fixed << std::setprecision(4) << "(" << e.ci.lower << ", " << e.ci.upper << ")";
    out << std::left << std::setw(12) << e.parameter << std::setw(static_cast<int>(width) + 2)
        << e.label << std::right << std::setw(10) << e.estimate << std::setw(10) << e.se
        << std::setw(22) << ci.str() << std::setw(10);
    if (std::isnan(e.p_value)) {
      out << "" << '\n';
    } else {
      out << e.p_value << '\n';
    }
  }
  out << "\nbandwidth " << report.diagnostics.bandwidth << ", lambda_min "
      << report.diagnostics.lambda_min << ", density floor hits "
      << report.diagnostics.floor_hits << '\n';
  out.flags(old_flags);
  out.precision(old_precision);
}

void write_diagnostics(std::ostream& out, const EstimateReport& report) {
  const auto& d = report.diagnostics;
  std::vector<std::vector<std::string>> rows{
      {"bandwidth", format_double(d.bandwidth)},
      {"lambda_min", format_double(d.lambda_min)},
      {"floor_hits", std::to_string(d.floor_hits)},
      {"closed_form", d.closed_form ? "true" : "false"},
      {"variance_plugin", d.variance_plugin},
      {"variance_unreliable", d.variance_unreliable ? "true" : "false"},
  };
  write_csv(out, {"key", "value"}, rows);
}

void write_metrics(std::ostream& out, const MetricsTable& table) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : table.rows) {
    rows.push_back({r.parameter, format_double(r.truth), format_double(r.bias),
                    r.sd ? format_double(*r.sd) : "NA", format_double(r.cp),
                    std::to_string(r.used)});
  }
  write_csv(out, {"parameter", "truth", "Bias", "SD", "CP", "replications"}, rows);
}

void write_replications(std::ostream& out, const MonteCarloResult& result) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : result.replications) {
    if (r.failed) continue;
    for (std::size_t k = 0; k < result.parameters.size(); ++k) {
      rows.push_back({std::to_string(r.replication), result.parameters[k].name,
                      format_double(r.estimate[k]), format_double(r.se[k]),
                      r.covered[k] ? "1" : "0", format_double(r.bandwidth)});
    }
  }
  write_csv(out, {"replication", "parameter", "estimate", "se", "covered", "bandwidth"}, rows);
}

void write_comparison(std::ostream& out, const ComparisonTable& table) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : table.rows) {
    rows.push_back({r.parameter, format_double(r.truth), format_double(r.semiparametric_bias),
                    format_double(r.mle_bias)});
  }
  write_csv(out, {"parameter", "truth", "semiparametric_bias", "mle_bias"}, rows);
}

void write_qq(std::ostream& out, const QQData& qq) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < qq.sample.size(); ++k) {
    rows.push_back({qq.parameter, std::to_string(k + 1), format_double(qq.sample[k]),
                    format_double(qq.theoretical[k])});
  }
  write_csv(out, {"parameter", "k", "sample_quantile", "normal_quantile"}, rows);
}

void write_bandwidth_trace(std::ostream& out, const BandwidthSelection& selection) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t g = 0; g < selection.grid.size(); ++g) {
    rows.push_back({format_double(selection.grid[g]), format_double(selection.criterion[g]),
                    selection.grid[g] == selection.bandwidth ? "1" : "0"});
  }
  write_csv(out, {"bandwidth", "criterion", "selected"}, rows);
}

void write_sign_check(std::ostream& out, const SignCheck& check) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < check.win_rate.size(); ++k) {
    rows.push_back({std::to_string(k + 1), format_double(check.edges[k]),
                    format_double(check.edges[k + 1]), std::to_string(check.bucket_counts[k]),
                    format_double(check.win_rate[k])});
  }
  write_csv(out, {"bucket", "lower", "upper", "count", "win_rate"}, rows);
}

}  // namespace pcrank
