#include "pcrank/kernel_density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcrank/error.hpp"
#include "pcrank/parallel.hpp"

namespace pcrank {

namespace {

constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();

std::vector<double> discrete_key(const Eigen::VectorXd& z, const std::vector<int>& columns) {
  std::vector<double> key;
  key.reserve(columns.size());
  for (int c : columns) key.push_back(z(c) == 0.0 ? 0.0 : z(c));  // fold -0.0
  return key;
}

}  // namespace

double quartic_kernel(double u) {
  if (std::abs(u) > 1.0) return 0.0;
  const double t = 1.0 - u * u;
  return 0.9375 * t * t;
}

DensityModel DensityModel::fit(const Dataset& dataset, double bandwidth,
                               const DensityOptions& options) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InputError("bandwidth must be positive");
  }
  if (!(options.floor > 0.0)) throw InputError("density floor must be positive");

  auto training = std::make_shared<Training>();
  const auto& schema = dataset.schema();
  training->continuous = schema.continuous_columns();
  training->discrete = schema.discrete_columns();
  const std::size_t p1 = training->continuous.size();

  struct Point {
    double key;
    double x0;
    std::size_t source;
    Eigen::VectorXd z;
  };
  std::map<std::vector<double>, std::vector<Point>> grouped;
  const auto records = dataset.records();
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    for (int side = 0; side < 2; ++side) {
      const double x0 = side == 0 ? r.x0 : -r.x0;
      Eigen::VectorXd z = side == 0 ? r.z : Eigen::VectorXd(-r.z);
      const double key = p1 > 0 ? z(training->continuous.front()) : x0;
      grouped[discrete_key(z, training->discrete)].push_back(
          {key, x0, 2 * k + static_cast<std::size_t>(side), std::move(z)});
    }
  }
  training->size = 2 * records.size();

  for (auto& [key, points] : grouped) {
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
      return a.key < b.key || (a.key == b.key && a.source < b.source);
    });
    Cell cell;
    cell.key.reserve(points.size());
    cell.x0.reserve(points.size());
    cell.source.reserve(points.size());
    cell.zc.reserve(points.size() * p1);
    for (const auto& pt : points) {
      cell.key.push_back(pt.key);
      cell.x0.push_back(pt.x0);
      cell.source.push_back(pt.source);
      for (int c : training->continuous) cell.zc.push_back(pt.z(c));
    }
    training->cells.emplace(key, std::move(cell));
  }

  DensityModel model;
  model.bandwidth_ = bandwidth;
  model.floor_ = options.floor;
  model.leave_one_out_ = options.leave_one_out;
  model.threads_ = options.threads;
  model.training_ = std::move(training);
  return model;
}

DensityModel DensityModel::with_bandwidth(double bandwidth) const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InputError("bandwidth must be positive");
  }
  DensityModel copy = *this;
  copy.bandwidth_ = bandwidth;
  return copy;
}

const DensityModel::Cell* DensityModel::find_cell(const Eigen::VectorXd& z) const {
  const auto it = training_->cells.find(discrete_key(z, training_->discrete));
  return it == training_->cells.end() ? nullptr : &it->second;
}

double DensityModel::ratio(const Cell& cell, double x0, const double* zc, std::size_t exclude,
                           bool& empty) const {
  const double h = bandwidth_;
  const double inv_h = 1.0 / h;
  const std::size_t p1 = training_->continuous.size();
  const double center = p1 > 0 ? zc[0] : x0;
  const auto lo = std::lower_bound(cell.key.begin(), cell.key.end(), center - h);
  const auto hi = std::upper_bound(lo, cell.key.end(), center + h);
  const auto first = static_cast<std::size_t>(lo - cell.key.begin());
  const auto last = static_cast<std::size_t>(hi - cell.key.begin());

  double numerator = 0.0;
  double denominator = 0.0;
  if (p1 == 0) {
    // Denominator kernel is empty: every point of the matching cell counts.
    denominator = static_cast<double>(cell.key.size());
    for (std::size_t idx = first; idx < last; ++idx) {
      if (cell.source[idx] == exclude) continue;
      numerator += quartic_kernel((cell.x0[idx] - x0) * inv_h);
    }
    // An excluded point is always the query record itself, so it lives here.
    if (exclude != kNoExclusion) denominator -= 1.0;
  } else {
    for (std::size_t idx = first; idx < last; ++idx) {
      if (cell.source[idx] == exclude) continue;
      const double* pt = cell.zc.data() + idx * p1;
      double kz = quartic_kernel((pt[0] - zc[0]) * inv_h);
      for (std::size_t d = 1; d < p1 && kz > 0.0; ++d) {
        kz *= quartic_kernel((pt[d] - zc[d]) * inv_h);
      }
      if (kz == 0.0) continue;
      denominator += kz;
      numerator += kz * quartic_kernel((cell.x0[idx] - x0) * inv_h);
    }
  }
  empty = !(denominator > 0.0);
  return empty ? 0.0 : numerator / (denominator * h);
}

double DensityModel::conditional_density(double x0, const Eigen::VectorXd& z) const {
  const Cell* cell = find_cell(z);
  if (cell == nullptr) return floor_;
  std::vector<double> zc;
  for (int c : training_->continuous) zc.push_back(z(c));
  bool empty = false;
  const double value = ratio(*cell, x0, zc.data(), kNoExclusion, empty);
  return empty ? floor_ : std::max(floor_, value);
}

DensityEvaluation DensityModel::record_densities(const Dataset& dataset) const {
  const auto records = dataset.records();
  DensityEvaluation out;
  out.values.assign(records.size(), floor_);
  std::vector<unsigned char> hit(records.size(), 0);
  const std::size_t p1 = training_->continuous.size();
  parallel_blocks(records.size(), threads_, [&](std::size_t begin, std::size_t end) {
    std::vector<double> zc(p1);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& r = records[k];
      const Cell* cell = find_cell(r.z);
      if (cell == nullptr) {
        hit[k] = 1;
        continue;
      }
      for (std::size_t d = 0; d < p1; ++d) zc[d] = r.z(training_->continuous[d]);
      bool empty = false;
      const double value =
          ratio(*cell, r.x0, zc.data(), leave_one_out_ ? 2 * k : kNoExclusion, empty);
      if (empty || value < floor_) {
        hit[k] = 1;
      } else {
        out.values[k] = value;
      }
    }
  });
  out.floor_hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  return out;
}

double delta_hat(const Dataset& dataset, std::span<const double> densities, double delta) {
  const auto records = dataset.records();
  if (densities.size() != records.size()) {
    throw DimensionError("delta_hat: one density value per record expected");
  }
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const double x = records[k].x0;
    const double diff = static_cast<double>(x + delta > 0.0) - static_cast<double>(x > 0.0) +
                        static_cast<double>(-x + delta > 0.0) - static_cast<double>(-x > 0.0);
    if (diff != 0.0) total += diff / densities[k];
  }
  return total / (2.0 * static_cast<double>(records.size()));
}

double delta_hat(const DensityModel& model, const Dataset& dataset, double delta) {
  const auto eval = model.record_densities(dataset);
  return delta_hat(dataset, eval.values, delta);
}

double delta_hat(const ConditionalDensityFn& density, const Dataset& dataset, double delta) {
  const auto records = dataset.records();
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : records) {
    const double fwd = static_cast<double>(r.x0 + delta > 0.0) - static_cast<double>(r.x0 > 0.0);
    const double back =
        static_cast<double>(-r.x0 + delta > 0.0) - static_cast<double>(-r.x0 > 0.0);
    if (fwd != 0.0) total += fwd / density(r.x0, r.z);
    if (back != 0.0) total += back / density(-r.x0, Eigen::VectorXd(-r.z));
  }
  return total / (2.0 * static_cast<double>(records.size()));
}

std::vector<double> default_deltas() {
  std::vector<double> out;
  for (int m = 1; m <= 9; ++m) out.push_back(0.1 * m);
  return out;
}

std::vector<double> default_bandwidth_grid(const Dataset& dataset) {
  const auto records = dataset.records();
  if (records.empty()) throw InputError("cannot build a bandwidth grid for an empty dataset");
  // The pooled sample is symmetric, so its mean is exactly zero.
  double sum_sq = 0.0;
  for (const auto& r : records) sum_sq += r.x0 * r.x0;
  const double pooled = 2.0 * static_cast<double>(records.size());
  const double sd = std::sqrt(2.0 * sum_sq / pooled);
  if (!(sd > 0.0)) throw InputError("special regressor is identically zero");
  const double rate = std::pow(pooled, -1.0 / (dataset.schema().p_continuous() + 5.0));
  std::vector<double> grid;
  for (double c : {0.5, 0.75, 1.0, 1.5, 2.0, 3.0}) grid.push_back(c * sd * rate);
  return grid;
}

double bandwidth_criterion(const Dataset& dataset, std::span<const double> densities,
                           std::span<const double> deltas) {
  double criterion = 0.0;
  for (double d : deltas) {
    const double gap = d - delta_hat(dataset, densities, d);
    criterion += gap * gap;
  }
  return criterion;
}

BandwidthSelection select_bandwidth(const Dataset& dataset, std::vector<double> grid,
                                    std::vector<double> deltas, const DensityOptions& options) {
  if (grid.empty()) throw InputError("bandwidth grid is empty");
  if (deltas.empty()) deltas = default_deltas();
  for (double d : deltas)
    if (!(d > 0.0 && d <= 1.0)) throw InputError("delta grid points must lie in (0, 1]");

  BandwidthSelection out;
  out.grid = grid;
  out.criterion.reserve(grid.size());
  const DensityModel base = DensityModel::fit(dataset, grid.front(), options);
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto eval = base.with_bandwidth(grid[g]).record_densities(dataset);
    const double value = bandwidth_criterion(dataset, eval.values, deltas);
    out.criterion.push_back(value);
    const bool better = g == 0 || value < out.criterion[best] ||
                        (value == out.criterion[best] && grid[g] < grid[best]);
    if (better) {
      best = g;
      out.selected = std::move(eval);
    }
  }
  out.bandwidth = grid[best];
  return out;
}

}  // namespace pcrank
