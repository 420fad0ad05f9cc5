#include "pcrank/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "pcrank/design.hpp"
#include "pcrank/error.hpp"

namespace pcrank {

bool ComparisonRecord::operator==(const ComparisonRecord& other) const {
  return head == other.head && tail == other.tail && occasion == other.occasion &&
         outcome == other.outcome && x0 == other.x0 && z.size() == other.z.size() &&
         (z.size() == 0 || z == other.z);
}

ComparisonRecord mirror(const ComparisonRecord& record) {
  ComparisonRecord m;
  m.head = record.tail;
  m.tail = record.head;
  m.occasion = record.occasion;
  m.outcome = 1 - record.outcome;
  m.x0 = -record.x0;
  m.z = -record.z;
  return m;
}

ComparisonRecord canonicalize(const ComparisonRecord& record) {
  if (record.head == record.tail) {
    throw DegeneratePairError("comparison of item " + std::to_string(record.head) +
                              " with itself");
  }
  return record.head < record.tail ? record : mirror(record);
}

ColumnSchema ColumnSchema::all_continuous(int p) {
  ColumnSchema schema;
  for (int k = 0; k < p; ++k) schema.names.push_back("z" + std::to_string(k + 1));
  schema.continuous_mask.assign(static_cast<std::size_t>(p), true);
  return schema;
}

int ColumnSchema::p_continuous() const {
  return static_cast<int>(std::count(continuous_mask.begin(), continuous_mask.end(), true));
}

std::vector<int> ColumnSchema::continuous_columns() const {
  std::vector<int> out;
  for (int k = 0; k < p(); ++k)
    if (continuous_mask[static_cast<std::size_t>(k)]) out.push_back(k);
  return out;
}

std::vector<int> ColumnSchema::discrete_columns() const {
  std::vector<int> out;
  for (int k = 0; k < p(); ++k)
    if (!continuous_mask[static_cast<std::size_t>(k)]) out.push_back(k);
  return out;
}

void ColumnSchema::check() const {
  if (special_sign != 1 && special_sign != -1) {
    throw InputError("special_sign must be +1 or -1");
  }
  if (!names.empty() && names.size() != continuous_mask.size()) {
    throw InputError("schema names and continuous mask differ in length");
  }
}

Dataset::Dataset(int n_plus_1, ColumnSchema schema, std::vector<ComparisonRecord> records)
    : n_plus_1_(n_plus_1), schema_(std::move(schema)) {
  schema_.check();
  if (schema_.names.empty()) {
    for (int k = 0; k < schema_.p(); ++k) schema_.names.push_back("z" + std::to_string(k + 1));
  }
  if (n_plus_1_ < 1) throw TooFewItemsError("a dataset needs at least one item");

  const auto p = static_cast<Eigen::Index>(schema_.p());
  records_.reserve(records.size());
  for (const auto& r : records) {
    if (r.head < 0 || r.head >= n_plus_1_ || r.tail < 0 || r.tail >= n_plus_1_) {
      throw InputError("item id out of range [0, " + std::to_string(n_plus_1_ - 1) + "]");
    }
    if (r.outcome != 0 && r.outcome != 1) throw InputError("outcome must be 0 or 1");
    if (r.occasion < 1) throw InputError("occasion must be a positive integer");
    if (r.z.size() != p) {
      throw DimensionError("record has " + std::to_string(r.z.size()) +
                           " covariates, schema expects " + std::to_string(p));
    }
    if (!std::isfinite(r.x0) || !r.z.allFinite()) throw InputError("non-finite covariate");
    records_.push_back(canonicalize(r));
  }

  std::stable_sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.head, a.tail, a.occasion) < std::tie(b.head, b.tail, b.occasion);
  });

  const auto items = static_cast<std::size_t>(n_plus_1_);
  row_lookup_.assign(items * items, -1);
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    if (!pairs_.empty() && pairs_.back().i == r.head && pairs_.back().j == r.tail) {
      if (records_[k - 1].occasion == r.occasion) {
        std::ostringstream msg;
        msg << "pair (" << r.head << "," << r.tail << ") occasion " << r.occasion
            << " stored twice";
        throw InputError(msg.str());
      }
      ++pairs_.back().count;
      continue;
    }
    row_lookup_[static_cast<std::size_t>(r.head) * items + static_cast<std::size_t>(r.tail)] =
        static_cast<int>(pairs_.size());
    pairs_.push_back({r.head, r.tail, k, 1});
  }
}

std::span<const ComparisonRecord> Dataset::pair_records(std::size_t row) const {
  const auto& slot = pairs_.at(row);
  return std::span<const ComparisonRecord>(records_).subspan(slot.first, slot.count);
}

std::optional<std::size_t> Dataset::row_of(ItemId i, ItemId j) const {
  if (i == j || i < 0 || j < 0 || i >= n_plus_1_ || j >= n_plus_1_) return std::nullopt;
  if (i > j) std::swap(i, j);
  const int row = row_lookup_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_plus_1_) +
                              static_cast<std::size_t>(j)];
  if (row < 0) return std::nullopt;
  return static_cast<std::size_t>(row);
}

std::size_t Dataset::total_pairs() const {
  const auto m = static_cast<std::size_t>(n());
  return m * (m + 1) / 2;
}

bool Dataset::balanced() const {
  if (!complete() || pairs_.empty()) return false;
  const auto t = pairs_.front().count;
  return std::all_of(pairs_.begin(), pairs_.end(), [t](const auto& s) { return s.count == t; });
}

Dataset Dataset::with_special_sign(int sign) const {
  Dataset copy = *this;
  copy.schema_.special_sign = sign;
  copy.schema_.check();
  return copy;
}

Eigen::MatrixXd covariate_means(const Dataset& dataset) {
  const auto rows = static_cast<Eigen::Index>(dataset.pairs().size());
  Eigen::MatrixXd zbar = Eigen::MatrixXd::Zero(rows, dataset.schema().p());
  for (Eigen::Index row = 0; row < rows; ++row) {
    const auto recs = dataset.pair_records(static_cast<std::size_t>(row));
    for (const auto& r : recs) zbar.row(row) += r.z.transpose();
    zbar.row(row) /= static_cast<double>(recs.size());
  }
  return zbar;
}

ValidationReport validate(const Dataset& dataset) {
  if (dataset.n_plus_1() < 2) {
    throw TooFewItemsError("at least two items are required, got " +
                           std::to_string(dataset.n_plus_1()));
  }
  ValidationReport report;
  report.n_plus_1 = dataset.n_plus_1();
  report.record_count = dataset.records().size();
  report.pair_count = dataset.pairs().size();
  report.complete = dataset.complete();
  report.balanced = dataset.balanced();
  for (const auto& slot : dataset.pairs()) report.counts.push_back(slot.count);
  for (ItemId i = 0; i < dataset.n_plus_1(); ++i)
    for (ItemId j = i + 1; j < dataset.n_plus_1(); ++j)
      if (!dataset.row_of(i, j)) report.missing.emplace_back(i, j);

  // Both orientations are implied, so the support is symmetric.
  double max_abs = 0.0;
  for (const auto& r : dataset.records()) max_abs = std::max(max_abs, std::abs(r.x0));
  report.x0_min = -max_abs;
  report.x0_max = max_abs;

  report.lambda_min = std::numeric_limits<double>::quiet_NaN();
  if (dataset.pairs().empty()) return report;
  try {
    const auto design = DesignOperator::for_dataset(dataset);
    report.connected = true;
    if (dataset.schema().p() > 0) {
      const Eigen::MatrixXd zbar = covariate_means(dataset);
      Eigen::MatrixXd gram;
      if (design.mode() == DesignMode::closed_form) {
        gram = design.projected_gram(zbar);
      } else {
        const Eigen::MatrixXd r = design.residualize(zbar);
        gram = r.transpose() * r;
      }
      gram /= static_cast<double>(zbar.rows());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
      report.lambda_min = eig.eigenvalues()(0);
    }
  } catch (const IdentifiabilityError&) {
    report.connected = false;
  }
  return report;
}

}  // namespace pcrank
