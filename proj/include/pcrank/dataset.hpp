#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pcrank {

using ItemId = int;

// One directed comparison: head met tail on `occasion`, outcome = 1 when head
// won. x0 is the special regressor, z the remaining covariates, both oriented
// from the head's point of view.
struct ComparisonRecord {
  ItemId head = 0;
  ItemId tail = 0;
  int occasion = 1;
  int outcome = 0;
  double x0 = 0.0;
  Eigen::VectorXd z;

  bool operator==(const ComparisonRecord& other) const;
};

// The same comparison seen from the tail: (tail, head, t, 1-a, -x0, -z).
ComparisonRecord mirror(const ComparisonRecord& record);

// Orients a record so that head < tail. Throws DegeneratePairError when
// head == tail.
ComparisonRecord canonicalize(const ComparisonRecord& record);

struct ColumnSchema {
  std::vector<std::string> names;     // covariate names, length p
  std::vector<bool> continuous_mask;  // length p
  int special_sign = 1;               // fixed coefficient of x0, +1 or -1
  std::string special_name = "x0";

  static ColumnSchema all_continuous(int p);

  int p() const { return static_cast<int>(continuous_mask.size()); }
  int p_continuous() const;
  std::vector<int> continuous_columns() const;
  std::vector<int> discrete_columns() const;

  // Throws InputError on an inconsistent schema.
  void check() const;
};

struct PairSlot {
  ItemId i = 0;
  ItemId j = 0;
  std::size_t first = 0;  // offset into Dataset::records()
  std::size_t count = 0;  // T_ij
};

// Canonicalized, immutable comparison data over items 0..n. Records are
// stored with head < tail, grouped by pair in the row order
// (0,1),...,(0,n),(1,2),...,(n-1,n) and by occasion within a pair.
class Dataset {
 public:
  Dataset(int n_plus_1, ColumnSchema schema, std::vector<ComparisonRecord> records);

  int n_plus_1() const { return n_plus_1_; }
  int n() const { return n_plus_1_ - 1; }
  const ColumnSchema& schema() const { return schema_; }

  std::span<const ComparisonRecord> records() const { return records_; }
  std::span<const PairSlot> pairs() const { return pairs_; }
  std::span<const ComparisonRecord> pair_records(std::size_t row) const;

  std::optional<std::size_t> row_of(ItemId i, ItemId j) const;

  // N = n(n+1)/2, the number of unordered pairs of the complete design.
  std::size_t total_pairs() const;
  bool complete() const { return pairs_.size() == total_pairs(); }
  bool balanced() const;

  // Copy with another special-regressor sign (resolved after ingestion when
  // the sign is chosen from the data).
  Dataset with_special_sign(int sign) const;

 private:
  int n_plus_1_;
  ColumnSchema schema_;
  std::vector<ComparisonRecord> records_;
  std::vector<PairSlot> pairs_;
  std::vector<int> row_lookup_;  // (n+1)^2 table, -1 when the pair is absent
};

struct ParameterSet {
  Eigen::VectorXd theta;  // theta_1..theta_n, theta_0 == 0
  Eigen::VectorXd eta;
};

struct ValidationReport {
  int n_plus_1 = 0;
  std::size_t record_count = 0;
  std::size_t pair_count = 0;
  std::vector<std::size_t> counts;  // T_ij in pair_index order
  bool complete = false;
  bool balanced = false;
  std::vector<std::pair<ItemId, ItemId>> missing;
  double x0_min = 0.0;
  double x0_max = 0.0;
  bool connected = false;
  // Smallest eigenvalue of Zbar' D Zbar / (#pairs); NaN when the graph is
  // disconnected or p == 0.
  double lambda_min = 0.0;
};

ValidationReport validate(const Dataset& dataset);

// Per-pair covariate means (Zbar) in pair_index order.
Eigen::MatrixXd covariate_means(const Dataset& dataset);

}  // namespace pcrank
