#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "pcrank/dataset.hpp"

namespace pcrank {

// Biweight kernel (15/16)(1 - u^2)^2 on [-1, 1].
double quartic_kernel(double u);

// Conditional density f(x0 | z) supplied by the caller (e.g. the analytic
// density of a simulation design).
using ConditionalDensityFn = std::function<double(double x0, const Eigen::VectorXd& z)>;

struct DensityOptions {
  double floor = 0.01;
  bool leave_one_out = false;
  int threads = 1;
};

struct DensityEvaluation {
  std::vector<double> values;  // one per canonical record, Dataset order
  std::size_t floor_hits = 0;
};

// Nadaraya-Watson estimate of f(x0 | z): product quartic kernels over x0 and
// the continuous covariates, exact matching on the discrete ones. The
// training sample pools both orientations of every record, so it is closed
// under (x0, z) -> (-x0, -z).
class DensityModel {
 public:
  static DensityModel fit(const Dataset& dataset, double bandwidth,
                          const DensityOptions& options = {});

  // Same training structure, different bandwidth (no re-sorting).
  DensityModel with_bandwidth(double bandwidth) const;

  double bandwidth() const { return bandwidth_; }
  double floor() const { return floor_; }
  std::size_t training_size() const { return training_->size; }

  double conditional_density(double x0, const Eigen::VectorXd& z) const;

  // f-hat at every canonical record of the dataset the model was fitted on.
  // The mirrored query has the same value because the training pool and the
  // kernels are symmetric, so one evaluation serves both orientations.
  DensityEvaluation record_densities(const Dataset& dataset) const;

 private:
  struct Cell {
    // Points sorted by `key`: the first continuous covariate, or x0 when no
    // covariate is continuous.
    std::vector<double> key;
    std::vector<double> x0;
    std::vector<double> zc;  // row-major, p_continuous per point
    std::vector<std::size_t> source;  // 2*record + orientation
  };

  // Returns the unclipped ratio; sets `empty` when the denominator vanished.
  double ratio(const Cell& cell, double x0, const double* zc, std::size_t exclude,
               bool& empty) const;
  const Cell* find_cell(const Eigen::VectorXd& z) const;

  struct Training {
    std::size_t size = 0;
    std::vector<int> continuous;
    std::vector<int> discrete;
    std::map<std::vector<double>, Cell> cells;
  };

  double bandwidth_ = 1.0;
  double floor_ = 0.01;
  bool leave_one_out_ = false;
  int threads_ = 1;
  std::shared_ptr<const Training> training_;
};

// Pooled average over both orientations of every record of
// [I(x0 + delta > 0) - I(x0 > 0)] / f(x0 | z), with f taken from `densities`
// (one value per canonical record, valid for both orientations).
double delta_hat(const Dataset& dataset, std::span<const double> densities, double delta);
double delta_hat(const DensityModel& model, const Dataset& dataset, double delta);
// Same statistic with a caller-supplied density evaluated at both orientations.
double delta_hat(const ConditionalDensityFn& density, const Dataset& dataset, double delta);

std::vector<double> default_deltas();

// {c * s * M^(-1/(p1+5)) : c in {0.5, 0.75, 1, 1.5, 2, 3}}, s the pooled
// standard deviation of x0 and M the pooled sample size.
std::vector<double> default_bandwidth_grid(const Dataset& dataset);

struct BandwidthSelection {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> criterion;  // sum_m (delta_m - delta_hat_m(h))^2 per grid point
  DensityEvaluation selected;     // cached record densities at `bandwidth`
};

double bandwidth_criterion(const Dataset& dataset, std::span<const double> densities,
                           std::span<const double> deltas);

BandwidthSelection select_bandwidth(const Dataset& dataset, std::vector<double> grid,
                                    std::vector<double> deltas = default_deltas(),
                                    const DensityOptions& options = {});

}  // namespace pcrank
