#include "pcrank/design.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pcrank/error.hpp"

namespace pcrank {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int size) : parent_(static_cast<std::size_t>(size)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

std::vector<std::vector<ItemId>> graph_components(
    int n, const std::vector<std::pair<ItemId, ItemId>>& pairs) {
  DisjointSets sets(n + 1);
  for (const auto& [i, j] : pairs) sets.unite(i, j);
  std::vector<std::vector<ItemId>> by_root(static_cast<std::size_t>(n + 1));
  for (ItemId v = 0; v <= n; ++v) by_root[static_cast<std::size_t>(sets.find(v))].push_back(v);
  std::vector<std::vector<ItemId>> out;
  for (auto& c : by_root)
    if (!c.empty()) out.push_back(std::move(c));
  return out;
}

std::string describe_components(const std::vector<std::vector<ItemId>>& comps) {
  std::ostringstream msg;
  msg << "comparison graph is disconnected (" << comps.size() << " components):";
  for (const auto& c : comps) {
    msg << " {";
    for (std::size_t k = 0; k < c.size() && k < 8; ++k) msg << (k ? "," : "") << c[k];
    if (c.size() > 8) msg << ",... (" << c.size() << " items)";
    msg << "}";
  }
  return msg.str();
}

}  // namespace

std::size_t complete_row(int n, ItemId i, ItemId j) {
  const auto si = static_cast<std::size_t>(i);
  const auto sn = static_cast<std::size_t>(n);
  return si * sn - si * (si - (si > 0 ? 1 : 0)) / 2 + static_cast<std::size_t>(j - i - 1);
}

DesignOperator DesignOperator::complete(int n) {
  if (n < 1) throw TooFewItemsError("design needs at least two items");
  DesignOperator op;
  op.n_ = n;
  op.mode_ = DesignMode::closed_form;
  op.pairs_.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2);
  for (ItemId i = 0; i < n; ++i)
    for (ItemId j = i + 1; j <= n; ++j) op.pairs_.emplace_back(i, j);
  return op;
}

DesignOperator DesignOperator::general(int n, std::vector<std::pair<ItemId, ItemId>> pairs,
                                       std::vector<double> row_weights) {
  if (n < 1) throw TooFewItemsError("design needs at least two items");
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    if (i < 0 || j > n || i >= j) throw InputError("design pairs must satisfy 0 <= i < j <= n");
    if (k > 0 && !(pairs[k - 1] < pairs[k])) {
      throw InputError("design pairs must be distinct and in row order");
    }
  }
  if (!row_weights.empty()) {
    if (row_weights.size() != pairs.size()) throw DimensionError("one weight per pair row");
    for (double w : row_weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw InputError("row weights must be positive");
  }
  const auto comps = graph_components(n, pairs);
  if (comps.size() > 1) throw IdentifiabilityError(describe_components(comps));

  DesignOperator op;
  op.n_ = n;
  op.mode_ = DesignMode::general;
  op.pairs_ = std::move(pairs);
  op.weights_ = std::move(row_weights);

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(op.pairs_.size() * 4);
  for (std::size_t k = 0; k < op.pairs_.size(); ++k) {
    const auto [i, j] = op.pairs_[k];
    const double w = op.weight(k);
    if (i > 0) entries.emplace_back(i - 1, i - 1, w);
    entries.emplace_back(j - 1, j - 1, w);
    if (i > 0) {
      entries.emplace_back(i - 1, j - 1, -w);
      entries.emplace_back(j - 1, i - 1, -w);
    }
  }
  op.laplacian_.resize(n, n);
  op.laplacian_.setFromTriplets(entries.begin(), entries.end());
  op.laplacian_.makeCompressed();
  return op;
}

DesignOperator DesignOperator::for_dataset(const Dataset& dataset, bool force_general) {
  const int n = dataset.n();
  if (dataset.complete() && !force_general) return complete(n);
  std::vector<std::pair<ItemId, ItemId>> pairs;
  pairs.reserve(dataset.pairs().size());
  for (const auto& slot : dataset.pairs()) pairs.emplace_back(slot.i, slot.j);
  return general(n, std::move(pairs));
}

std::size_t DesignOperator::rows() const { return pairs_.size(); }

std::pair<ItemId, ItemId> DesignOperator::pair(std::size_t row) const { return pairs_.at(row); }

void DesignOperator::require_closed_form(const char* what) const {
  if (mode_ != DesignMode::closed_form) {
    throw UnsupportedModeError(std::string(what) +
                               " needs a complete design; use solve_normal_equations");
  }
}

void DesignOperator::check_rows(const Eigen::VectorXd& y, const char* what) const {
  if (static_cast<std::size_t>(y.size()) != rows()) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows()) +
                         " rows, got " + std::to_string(y.size()));
  }
}

Eigen::VectorXd DesignOperator::u_apply(const Eigen::VectorXd& theta) const {
  if (theta.size() != n_) throw DimensionError("u_apply: theta must have length n");
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows()));
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto [i, j] = pairs_[k];
    out(static_cast<Eigen::Index>(k)) = (i > 0 ? theta(i - 1) : 0.0) - theta(j - 1);
  }
  return out;
}

Eigen::VectorXd DesignOperator::u_transpose_apply(const Eigen::VectorXd& y) const {
  check_rows(y, "u_transpose_apply");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto [i, j] = pairs_[k];
    const double v = y(static_cast<Eigen::Index>(k));
    if (i > 0) out(i - 1) += v;
    out(j - 1) -= v;
  }
  return out;
}

Eigen::VectorXd DesignOperator::v_inverse_apply(const Eigen::VectorXd& x) const {
  require_closed_form("v_inverse_apply");
  if (x.size() != n_) throw DimensionError("v_inverse_apply: x must have length n");
  return (x.array() + x.sum()).matrix() / static_cast<double>(n_ + 1);
}

Eigen::VectorXd DesignOperator::d_apply(const Eigen::VectorXd& y) const {
  require_closed_form("d_apply");
  check_rows(y, "d_apply");
  return y - u_apply(v_inverse_apply(u_transpose_apply(y)));
}

Eigen::MatrixXd DesignOperator::projected_gram(const Eigen::MatrixXd& zbar) const {
  require_closed_form("projected_gram");
  if (static_cast<std::size_t>(zbar.rows()) != rows()) {
    throw DimensionError("projected_gram: Zbar must have one row per pair");
  }
  if (!zbar.allFinite()) throw InputError("projected_gram: non-finite entries in Zbar");
  // S_i = sum_{j != i} Zbar_ij with Zbar_ji = -Zbar_ij.
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_ + 1, zbar.cols());
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto [i, j] = pairs_[k];
    sums.row(i) += zbar.row(static_cast<Eigen::Index>(k));
    sums.row(j) -= zbar.row(static_cast<Eigen::Index>(k));
  }
  Eigen::MatrixXd gram = zbar.transpose() * zbar;
  gram.noalias() -= sums.transpose() * sums / static_cast<double>(n_ + 1);
  return 0.5 * (gram + gram.transpose());
}

Eigen::VectorXd DesignOperator::laplacian_solve(const Eigen::VectorXd& b) const {
  if (b.size() != n_) throw DimensionError("laplacian_solve: rhs must have length n");
  if (mode_ == DesignMode::closed_form) return v_inverse_apply(b);
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(kSolverTolerance);
  cg.setMaxIterations(std::max(1000, 10 * n_));
  cg.compute(laplacian_);
  Eigen::VectorXd x = cg.solve(b);
  // The requested tolerance sits at round-off level; anything within 1e-10
  // relative residual is accepted.
  if (cg.info() != Eigen::Success && !(cg.error() <= 1e-10)) {
    throw Error("Laplacian solve did not converge (relative residual " +
                std::to_string(cg.error()) + ")");
  }
  return x;
}

Eigen::VectorXd DesignOperator::residualize(const Eigen::VectorXd& y) const {
  check_rows(y, "residualize");
  if (mode_ == DesignMode::closed_form) return d_apply(y);
  Eigen::VectorXd wy = y;
  if (weighted())
    for (Eigen::Index k = 0; k < wy.size(); ++k) wy(k) *= weights_[static_cast<std::size_t>(k)];
  return y - u_apply(laplacian_solve(u_transpose_apply(wy)));
}

Eigen::MatrixXd DesignOperator::residualize(const Eigen::MatrixXd& y) const {
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index c = 0; c < y.cols(); ++c) out.col(c) = residualize(Eigen::VectorXd(y.col(c)));
  return out;
}

ParameterSet DesignOperator::solve_normal_equations(const Eigen::MatrixXd& zbar,
                                                    const Eigen::VectorXd& ybreve) const {
  check_rows(ybreve, "solve_normal_equations");
  if (static_cast<std::size_t>(zbar.rows()) != rows()) {
    throw DimensionError("solve_normal_equations: Zbar must have one row per pair");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows()));
  if (weighted()) w = Eigen::Map<const Eigen::VectorXd>(weights_.data(), w.size());

  ParameterSet out;
  out.eta = Eigen::VectorXd::Zero(zbar.cols());
  if (zbar.cols() > 0) {
    const Eigen::MatrixXd z_res = residualize(zbar);
    const Eigen::VectorXd y_res = residualize(ybreve);
    const Eigen::MatrixXd gram = z_res.transpose() * w.asDiagonal() * z_res;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()(0) > 1e-10 * std::max(gram.trace(), 1e-300))) {
      throw CollinearityError(
          "projected covariate Gram matrix is singular: covariates are (nearly) explained "
          "by the merit design");
    }
    out.eta = gram.ldlt().solve(z_res.transpose() * w.asDiagonal() * y_res);
  }
  const Eigen::VectorXd resid = ybreve - zbar * out.eta;
  out.theta = laplacian_solve(u_transpose_apply((w.array() * resid.array()).matrix()));
  return out;
}

Eigen::VectorXd DesignOperator::sandwich_theta_variance(const Eigen::VectorXd& row_variance) const {
  check_rows(row_variance, "sandwich_theta_variance");
  const auto n = static_cast<Eigen::Index>(n_);
  // Edge weights c_e = w_e^2 s_e of the "meat" Laplacian U' diag(c) U.
  Eigen::VectorXd c = row_variance;
  for (std::size_t k = 0; k < rows(); ++k) {
    const double w = weight(k);
    c(static_cast<Eigen::Index>(k)) *= w * w;
  }

  if (mode_ == DesignMode::closed_form) {
    // With V^-1 = (I + 11')/(n+1) and M = U' diag(c) U:
    // [V^-1 M V^-1]_ii = (M_ii + 2 (M1)_i + 1'M1) / (n+1)^2, where (M1)_i is
    // the weight between item i and item 0.
    Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd to_reference = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      const double ck = c(static_cast<Eigen::Index>(k));
      if (i > 0) degree(i - 1) += ck;
      degree(j - 1) += ck;
      if (i == 0) to_reference(j - 1) += ck;
    }
    const double total = to_reference.sum();
    const double scale = 1.0 / (static_cast<double>(n_ + 1) * static_cast<double>(n_ + 1));
    return ((degree + 2.0 * to_reference).array() + total).matrix() * scale;
  }

  // General design: X = V^-1 densely (n is at most a few thousand), then
  // x_i' M x_i summed edge by edge.
  const Eigen::MatrixXd dense_laplacian = Eigen::MatrixXd(laplacian_);
  const Eigen::MatrixXd inverse =
      dense_laplacian.llt().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Eigen::Index col = 0; col < n; ++col) {
    double acc = 0.0;
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      const double diff = (i > 0 ? inverse(i - 1, col) : 0.0) - inverse(j - 1, col);
      acc += c(static_cast<Eigen::Index>(k)) * diff * diff;
    }
    out(col) = acc;
  }
  return out;
}

std::vector<std::vector<ItemId>> DesignOperator::components() const {
  return graph_components(n_, pairs_);
}

}  // namespace pcrank
