#include <doctest.h>

#include <cmath>

#include "pcrank/dataset.hpp"
#include "pcrank/error.hpp"
#include "support.hpp"

using namespace pcrank;
using namespace testing_support;

namespace {

ComparisonRecord rec(ItemId h, ItemId t, int occ, int a, double x0, std::vector<double> z) {
  ComparisonRecord r;
  r.head = h;
  r.tail = t;
  r.occasion = occ;
  r.outcome = a;
  r.x0 = x0;
  r.z = Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return r;
}

}  // namespace

TEST_CASE("mirror is an involution and canonicalize orients head < tail") {
  const auto r = rec(3, 1, 2, 1, 0.7, {1.0, -2.0});
  const auto m = mirror(r);
  CHECK(m.head == 1);
  CHECK(m.tail == 3);
  CHECK(m.outcome == 0);
  CHECK(m.x0 == -0.7);
  CHECK(m.z(1) == 2.0);
  CHECK(mirror(m) == r);
  CHECK(canonicalize(r) == m);
  CHECK(canonicalize(m) == m);
  CHECK_THROWS_AS(canonicalize(rec(2, 2, 1, 0, 0.0, {})), DegeneratePairError);
}

TEST_CASE("dataset orders records by pair and occasion") {
  std::vector<ComparisonRecord> records{
      rec(2, 0, 1, 1, 0.5, {1.0}), rec(0, 1, 2, 0, 0.1, {0.0}), rec(1, 0, 1, 1, 0.2, {0.3}),
      rec(1, 2, 1, 0, -0.4, {2.0})};
  const Dataset ds(3, ColumnSchema::all_continuous(1), records);
  CHECK(ds.n() == 2);
  CHECK(ds.complete());
  CHECK_FALSE(ds.balanced());
  REQUIRE(ds.pairs().size() == 3);
  CHECK(ds.pairs()[0].count == 2);
  CHECK(ds.pair_records(0)[0].occasion == 1);
  CHECK(ds.pair_records(0)[0].outcome == 0);  // mirrored (1,0) record
  CHECK(ds.pair_records(0)[0].x0 == -0.2);
  CHECK(ds.pair_records(1)[0].outcome == 0);  // mirrored (2,0) record
  CHECK(*ds.row_of(2, 1) == 2);
  CHECK(ds.total_pairs() == 3);
}

TEST_CASE("dataset rejects malformed records") {
  const auto schema = ColumnSchema::all_continuous(1);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(0, 3, 1, 1, 0.0, {0.0})}), InputError);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(0, 1, 1, 2, 0.0, {0.0})}), InputError);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(0, 1, 0, 1, 0.0, {0.0})}), InputError);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(0, 1, 1, 1, 0.0, {0.0, 1.0})}), DimensionError);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(0, 1, 1, 1, NAN, {0.0})}), InputError);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(1, 1, 1, 1, 0.0, {0.0})}), DegeneratePairError);
  CHECK_THROWS_AS(Dataset(3, schema, {rec(0, 1, 1, 1, 0.0, {0.0}), rec(1, 0, 1, 0, 0.0, {0.0})}),
                  InputError);
}

TEST_CASE("validate reports design structure") {
  const auto ds = random_dataset(5, 3, 2, 4);
  const auto report = validate(ds);
  CHECK(report.n_plus_1 == 6);
  CHECK(report.record_count == 45);
  CHECK(report.pair_count == 15);
  CHECK(report.complete);
  CHECK(report.balanced);
  CHECK(report.connected);
  CHECK(report.missing.empty());
  CHECK(report.lambda_min > 0.0);

  const auto sparse = random_dataset(4, 1, 1, 2, {{0, 1}, {2, 3}, {3, 4}});
  const auto r2 = validate(sparse);
  CHECK_FALSE(r2.complete);
  CHECK_FALSE(r2.connected);
  CHECK(r2.missing.size() == 7);
  CHECK(std::isnan(r2.lambda_min));

  CHECK_THROWS_AS(validate(Dataset(1, ColumnSchema::all_continuous(0), {})), TooFewItemsError);
}

TEST_CASE("covariate means average within each pair") {
  const Dataset ds(2, ColumnSchema::all_continuous(1),
                   {rec(0, 1, 1, 1, 0.0, {1.0}), rec(1, 0, 2, 1, 0.0, {1.0})});
  const auto zbar = covariate_means(ds);
  REQUIRE(zbar.rows() == 1);
  CHECK(zbar(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("with_special_sign keeps records") {
  const auto ds = random_dataset(3, 2, 1, 8);
  const auto flipped = ds.with_special_sign(-1);
  CHECK(flipped.schema().special_sign == -1);
  CHECK(flipped.records().size() == ds.records().size());
  CHECK(flipped.records()[3] == ds.records()[3]);
  CHECK_THROWS_AS(ds.with_special_sign(0), InputError);
}
