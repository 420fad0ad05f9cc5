#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <utility>
#include <vector>

#include "pcrank/dataset.hpp"

namespace pcrank {

enum class DesignMode { closed_form, general };

// Structured operators for the merit design U (rows e_i - e_j, e_0 = 0), the
// reduced Laplacian V = U'U and the residual projector D = I - U V^-1 U'.
// Nothing of size N x N is ever formed.
//
// closed_form: every one of the N = n(n+1)/2 pairs is present once, so
//   V = (n+1) I - 11' and V^-1 = (11' + I) / (n+1).
// general: an arbitrary connected set of pairs with optional positive row
//   weights; V is the (weighted) reduced Laplacian, solved by preconditioned
//   conjugate gradients.
class DesignOperator {
 public:
  static DesignOperator complete(int n);
  // Pairs must be canonical (i < j), distinct, and given in row order.
  // Throws IdentifiabilityError when the comparison graph is disconnected.
  static DesignOperator general(int n, std::vector<std::pair<ItemId, ItemId>> pairs,
                                std::vector<double> row_weights = {});
  static DesignOperator for_dataset(const Dataset& dataset, bool force_general = false);

  int n() const { return n_; }
  DesignMode mode() const { return mode_; }
  std::size_t rows() const;
  std::pair<ItemId, ItemId> pair(std::size_t row) const;
  bool weighted() const { return !weights_.empty(); }
  double weight(std::size_t row) const { return weights_.empty() ? 1.0 : weights_[row]; }

  Eigen::VectorXd u_apply(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd u_transpose_apply(const Eigen::VectorXd& y) const;

  // closed_form only; general designs go through solve_normal_equations.
  Eigen::VectorXd v_inverse_apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd d_apply(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd projected_gram(const Eigen::MatrixXd& zbar) const;

  // Either mode. Solves (U'WU) x = b.
  Eigen::VectorXd laplacian_solve(const Eigen::VectorXd& b) const;
  // Either mode. y - U (U'WU)^-1 U'W y, i.e. the part of y the merits cannot
  // explain. Equals d_apply in closed_form mode.
  Eigen::VectorXd residualize(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd residualize(const Eigen::MatrixXd& y) const;

  // Weighted least squares min ||W^1/2 (y - U theta - Zbar eta)||^2 by block
  // elimination of eta. Valid in both modes; always uses the Laplacian
  // solver, so it is an independent route from the closed-form formulas.
  ParameterSet solve_normal_equations(const Eigen::MatrixXd& zbar,
                                      const Eigen::VectorXd& ybreve) const;

  // Diagonal of V^-1 U' diag(w^2 s) U V^-1 for per-row nonnegative s; the
  // merit covariance under heteroskedastic row variances s.
  Eigen::VectorXd sandwich_theta_variance(const Eigen::VectorXd& row_variance) const;

  // Connected components of the comparison graph over items 0..n.
  std::vector<std::vector<ItemId>> components() const;

  static constexpr double kSolverTolerance = 1e-14;

 private:
  DesignOperator() = default;
  void require_closed_form(const char* what) const;
  void check_rows(const Eigen::VectorXd& y, const char* what) const;

  int n_ = 0;
  DesignMode mode_ = DesignMode::closed_form;
  std::vector<std::pair<ItemId, ItemId>> pairs_;  // general mode only
  std::vector<double> weights_;                   // empty means unit weights
  Eigen::SparseMatrix<double> laplacian_;         // general mode only
};

// Row of pair (i, j), i < j, in the complete-design order.
std::size_t complete_row(int n, ItemId i, ItemId j);

}  // namespace pcrank
