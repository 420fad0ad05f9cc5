#pragma once

#include <Eigen/Dense>

#include <random>
#include <utility>
#include <vector>

#include "pcrank/dataset.hpp"

namespace testing_support {

using pcrank::ItemId;

inline std::vector<std::pair<ItemId, ItemId>> all_pairs(int n) {
  std::vector<std::pair<ItemId, ItemId>> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j <= n; ++j) out.emplace_back(i, j);
  return out;
}

// Dense merit design with the reference column dropped.
inline Eigen::MatrixXd dense_u(int n, const std::vector<std::pair<ItemId, ItemId>>& pairs) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pairs.size()), n);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    if (i > 0) u(static_cast<Eigen::Index>(r), i - 1) = 1.0;
    if (j > 0) u(static_cast<Eigen::Index>(r), j - 1) = -1.0;
  }
  return u;
}

inline Eigen::MatrixXd dense_d(const Eigen::MatrixXd& u) {
  const Eigen::MatrixXd v = u.transpose() * u;
  return Eigen::MatrixXd::Identity(u.rows(), u.rows()) - u * v.inverse() * u.transpose();
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(1.0, b.norm());
  return (a - b).norm() / scale;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index size, std::mt19937_64& rng) {
  return random_matrix(size, 1, rng).col(0);
}

// Random comparisons over the given pairs, T occasions each, p continuous
// covariates, logistic outcomes.
inline pcrank::Dataset random_dataset(int n, int T, int p, std::uint64_t seed,
                                      std::vector<std::pair<ItemId, ItemId>> pairs = {}) {
  if (pairs.empty()) pairs = all_pairs(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  std::vector<pcrank::ComparisonRecord> records;
  for (const auto& [i, j] : pairs) {
    for (int t = 1; t <= T; ++t) {
      pcrank::ComparisonRecord r;
      r.head = i;
      r.tail = j;
      r.occasion = t;
      r.z.resize(p);
      for (int k = 0; k < p; ++k) r.z(k) = g(rng);
      r.x0 = g(rng);
      const double index = 0.1 * (i - j) + r.x0 + (p > 0 ? 0.5 * r.z(0) : 0.0);
      r.outcome = u(rng) < 1.0 / (1.0 + std::exp(-index)) ? 1 : 0;
      records.push_back(r);
    }
  }
  return pcrank::Dataset(n + 1, pcrank::ColumnSchema::all_continuous(p), std::move(records));
}

}  // namespace testing_support
