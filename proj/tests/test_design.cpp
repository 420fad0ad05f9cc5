#include <doctest.h>

#include "pcrank/design.hpp"
#include "pcrank/error.hpp"
#include "support.hpp"

using namespace pcrank;
using namespace testing_support;

TEST_CASE("complete_row follows the pair order") {
  const int n = 6;
  const auto pairs = all_pairs(n);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    CHECK(complete_row(n, pairs[r].first, pairs[r].second) == r);
  }
}

TEST_CASE("complete operators match dense oracles") {
  std::mt19937_64 rng(11);
  for (int n : {1, 2, 3, 5, 9, 14}) {
    const auto pairs = all_pairs(n);
    const Eigen::MatrixXd u = dense_u(n, pairs);
    const Eigen::MatrixXd v = u.transpose() * u;
    const Eigen::MatrixXd d = dense_d(u);
    const auto op = DesignOperator::complete(n);
    CHECK(op.rows() == pairs.size());
    CHECK(op.mode() == DesignMode::closed_form);

    const Eigen::VectorXd theta = random_vector(n, rng);
    const Eigen::VectorXd y = random_vector(u.rows(), rng);
    const Eigen::MatrixXd z = random_matrix(u.rows(), 3, rng);
    CHECK(rel_err(op.u_apply(theta), u * theta) < 1e-12);
    CHECK(rel_err(op.u_transpose_apply(y), u.transpose() * y) < 1e-12);
    CHECK(rel_err(op.v_inverse_apply(theta), v.inverse() * theta) < 1e-12);
    CHECK(rel_err(op.d_apply(y), d * y) < 1e-12);
    CHECK(rel_err(op.projected_gram(z), z.transpose() * d * z) < 1e-12);
    CHECK(rel_err(op.residualize(y), d * y) < 1e-12);
    CHECK(rel_err(op.residualize(z), d * z) < 1e-12);
    CHECK(rel_err(op.laplacian_solve(theta), v.inverse() * theta) < 1e-12);
  }
}

TEST_CASE("general operators match dense oracles on incomplete weighted designs") {
  std::mt19937_64 rng(5);
  const int n = 7;
  std::vector<std::pair<ItemId, ItemId>> pairs;
  std::vector<double> weights;
  std::uniform_real_distribution<double> coin;
  for (const auto& pr : all_pairs(n)) {
    const bool chain = pr.second == pr.first + 1;
    if (chain || coin(rng) < 0.4) {
      pairs.push_back(pr);
      weights.push_back(1.0 + 3.0 * coin(rng));
    }
  }
  const Eigen::MatrixXd u = dense_u(n, pairs);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                              static_cast<Eigen::Index>(weights.size()));
  const Eigen::MatrixXd v = u.transpose() * w.asDiagonal() * u;
  const auto op = DesignOperator::general(n, pairs, weights);
  CHECK(op.mode() == DesignMode::general);

  const Eigen::VectorXd theta = random_vector(n, rng);
  const Eigen::VectorXd y = random_vector(u.rows(), rng);
  const Eigen::MatrixXd z = random_matrix(u.rows(), 2, rng);
  CHECK(rel_err(op.u_apply(theta), u * theta) < 1e-12);
  CHECK(rel_err(op.u_transpose_apply(y), u.transpose() * y) < 1e-12);
  CHECK(rel_err(op.laplacian_solve(theta), v.inverse() * theta) < 1e-9);
  const Eigen::VectorXd res = y - u * v.inverse() * u.transpose() * w.asDiagonal() * y;
  CHECK(rel_err(op.residualize(y), res) < 1e-9);

  // weighted least squares against a dense solve
  Eigen::MatrixXd x(u.rows(), n + 2);
  x << u, z;
  const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
  const Eigen::VectorXd beta = xtwx.ldlt().solve(x.transpose() * w.asDiagonal() * y);
  const ParameterSet est = op.solve_normal_equations(z, y);
  CHECK(rel_err(est.theta, beta.head(n)) < 1e-8);
  CHECK(rel_err(est.eta, beta.tail(2)) < 1e-8);

  const Eigen::VectorXd s = random_vector(u.rows(), rng).cwiseAbs();
  const Eigen::MatrixXd vinv = v.inverse();
  const Eigen::MatrixXd meat = u.transpose() * (w.array().square() * s.array()).matrix().asDiagonal() * u;
  const Eigen::VectorXd expected = (vinv * meat * vinv).diagonal();
  CHECK(rel_err(op.sandwich_theta_variance(s), expected) < 1e-8);

  CHECK_THROWS_AS(op.d_apply(y), UnsupportedModeError);
  CHECK_THROWS_AS(op.projected_gram(z), UnsupportedModeError);
}

TEST_CASE("closed-form sandwich variance matches the dense formula") {
  std::mt19937_64 rng(3);
  for (int n : {2, 4, 8}) {
    const auto pairs = all_pairs(n);
    const Eigen::MatrixXd u = dense_u(n, pairs);
    const Eigen::MatrixXd vinv = (u.transpose() * u).inverse();
    const Eigen::VectorXd s = random_vector(u.rows(), rng).cwiseAbs();
    const Eigen::VectorXd expected = (vinv * u.transpose() * s.asDiagonal() * u * vinv).diagonal();
    CHECK(rel_err(DesignOperator::complete(n).sandwich_theta_variance(s), expected) < 1e-12);
    CHECK(rel_err(DesignOperator::general(n, pairs).sandwich_theta_variance(s), expected) < 1e-8);
  }
}

TEST_CASE("projector identities") {
  std::mt19937_64 rng(9);
  const int n = 10;
  const auto op = DesignOperator::complete(n);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::VectorXd theta = random_vector(n, rng);
    CHECK(op.d_apply(op.u_apply(theta)).norm() <= 1e-12 * theta.norm());
    const Eigen::VectorXd y = random_vector(static_cast<Eigen::Index>(op.rows()), rng);
    const Eigen::VectorXd x = random_vector(static_cast<Eigen::Index>(op.rows()), rng);
    const Eigen::VectorXd dy = op.d_apply(y);
    CHECK((op.d_apply(dy) - dy).norm() <= 1e-12 * y.norm());
    CHECK(std::abs(x.dot(dy) - op.d_apply(x).dot(y)) <= 1e-12 * x.norm() * y.norm());
  }
}

TEST_CASE("general designs reject bad input") {
  CHECK_THROWS_AS(DesignOperator::general(3, {{0, 1}, {2, 3}}), IdentifiabilityError);
  CHECK_THROWS_AS(DesignOperator::general(2, {{1, 0}, {1, 2}}), InputError);
  CHECK_THROWS_AS(DesignOperator::general(2, {{0, 1}, {0, 1}, {1, 2}}), InputError);
  CHECK_THROWS_AS(DesignOperator::general(2, {{0, 1}, {1, 2}}, {1.0, -1.0}), InputError);
  try {
    DesignOperator::general(3, {{0, 1}, {2, 3}});
  } catch (const IdentifiabilityError& e) {
    CHECK(std::string(e.what()).find("{2,3}") != std::string::npos);
  }
}

TEST_CASE("for_dataset picks the path") {
  const auto complete = random_dataset(4, 2, 1, 1);
  CHECK(DesignOperator::for_dataset(complete).mode() == DesignMode::closed_form);
  CHECK(DesignOperator::for_dataset(complete, true).mode() == DesignMode::general);
  const auto sparse = random_dataset(4, 1, 1, 2, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  CHECK(DesignOperator::for_dataset(sparse).mode() == DesignMode::general);
}
