#include "fractoid/meanderiv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fractoid/error.hpp"
#include "fractoid/parallel.hpp"
#include "fractoid/stats.hpp"

namespace fractoid::meanderiv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One chunk of paths reduced into per-bin accumulators.
struct Partial {
  std::vector<stats::RunningStats> feature;
  std::vector<double> position_sum;
  std::vector<double> time_sum;
  std::vector<std::size_t> count;
};

bool is_flat(const geometry::MetricChart& chart) {
  return chart.name().rfind("euclidean:", 0) == 0 || chart.name() == "minkowski:1+3";
}

void check_windows(const PathEnsemble& ensemble, const BinGrid& grid) {
  if (grid.dimension() != ensemble.dimension())
    throw ParameterError("bin grid has dimension " + std::to_string(grid.dimension()) + " but the ensemble has " +
                         std::to_string(ensemble.dimension()));
  for (const auto& w : grid.windows)
    if (w.end > ensemble.steps() + 1)
      throw ParameterError("time window ends at step " + std::to_string(w.end) + " past the ensemble's " +
                           std::to_string(ensemble.steps()) + " steps");
}

double interval(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) {
    const double v = b[j] - a[j];
    s += j == 0 ? -v * v : v * v;
  }
  return s;
}

// Runs `feature(path, k, out)` at every (path, step) in the grid's windows whose
// state lies in a bin; returning false drops the sample.
template <class Feature>
BinEstimates accumulate(const PathEnsemble& ensemble, const EstimatorConfig& config, int components,
                        Feature&& feature) {
  config.validate();
  const BinGrid& grid = config.grid;
  check_windows(ensemble, grid);
  const std::size_t bins = grid.size();
  const std::size_t cells = grid.spatial_bins();
  const int d = ensemble.dimension();
  const auto f = static_cast<std::size_t>(components);

  const auto make = [&] {
    Partial p;
    p.feature.resize(bins * f);
    p.position_sum.assign(bins * d, 0.0);
    p.time_sum.assign(bins, 0.0);
    p.count.assign(bins, 0);
    return p;
  };
  const auto body = [&](Partial& p, std::size_t begin, std::size_t end) {
    std::vector<double> out(f);
    for (std::size_t path = begin; path < end; ++path) {
      for (std::size_t w = 0; w < grid.windows.size(); ++w) {
        for (std::size_t k = grid.windows[w].begin; k < grid.windows[w].end; ++k) {
          const double* x = ensemble.point(path, k);
          const auto cell = grid.cell(x);
          if (!cell || !feature(path, k, out.data())) continue;
          const std::size_t b = w * cells + *cell;
          for (std::size_t c = 0; c < f; ++c) p.feature[b * f + c].add(out[c]);
          for (int j = 0; j < d; ++j) p.position_sum[b * d + j] += x[j];
          p.time_sum[b] += ensemble.time(k);
          ++p.count[b];
        }
      }
    }
  };
  const auto merge = [&](Partial& into, const Partial& from) {
    for (std::size_t i = 0; i < into.feature.size(); ++i) into.feature[i].merge(from.feature[i]);
    for (std::size_t i = 0; i < into.position_sum.size(); ++i) into.position_sum[i] += from.position_sum[i];
    for (std::size_t i = 0; i < bins; ++i) {
      into.time_sum[i] += from.time_sum[i];
      into.count[i] += from.count[i];
    }
  };
  const Partial total = parallel_reduce<Partial>(ensemble.paths(), make, body, merge);

  BinEstimates out;
  out.grid = grid;
  out.min_count = config.min_count;
  out.components = components;
  out.count = total.count;
  out.mean.assign(bins, Vec::Constant(components, kNaN));
  out.standard_error.assign(bins, Vec::Constant(components, kNaN));
  out.position.assign(bins, Vec::Constant(d, kNaN));
  out.time.assign(bins, kNaN);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t n = total.count[b];
    if (n == 0) continue;
    for (int j = 0; j < d; ++j) out.position[b][j] = total.position_sum[b * d + j] / static_cast<double>(n);
    out.time[b] = total.time_sum[b] / static_cast<double>(n);
    if (n < config.min_count) continue;
    for (std::size_t c = 0; c < f; ++c) {
      out.mean[b][c] = total.feature[b * f + c].mean();
      out.standard_error[b][c] = total.feature[b * f + c].standard_error();
    }
  }
  if (out.populated_count() == 0)
    throw EstimationError("no bin reached " + std::to_string(config.min_count) + " samples (insufficient samples)");
  return out;
}

void require_lorentzian(const PathEnsemble& ensemble, const EstimatorConfig& config) {
  if (config.causal_split == CausalSplit::off) return;
  if (ensemble.chart_name.empty() || geometry::make_chart(ensemble.chart_name).signature().negative != 1)
    throw ParameterError("causal_split needs an ensemble on a Lorentzian chart, got '" + ensemble.chart_name + "'");
}

bool keep(const EstimatorConfig& config, const double* a, const double* b, int d) {
  switch (config.causal_split) {
    case CausalSplit::off:
      return true;
    case CausalSplit::timelike:
      return interval(a, b, d) <= 0.0;
    case CausalSplit::spacelike:
      return interval(a, b, d) > 0.0;
  }
  return true;
}

BinEstimates difference_quotient(const PathEnsemble& ensemble, const EstimatorConfig& config, Direction direction) {
  require_lorentzian(ensemble, config);
  const int d = ensemble.dimension();
  const std::size_t lag = config.lag;
  const double tau = static_cast<double>(lag) * ensemble.dt();
  return accumulate(ensemble, config, d, [&](std::size_t path, std::size_t k, double* out) {
    const bool fwd = direction == Direction::forward;
    if (fwd ? k + lag > ensemble.steps() : k < lag) return false;
    const double* a = ensemble.point(path, fwd ? k : k - lag);
    const double* b = ensemble.point(path, fwd ? k + lag : k);
    if (!keep(config, a, b, d)) return false;
    for (int j = 0; j < d; ++j) out[j] = (b[j] - a[j]) / tau;
    return true;
  });
}

bool same_grid(const BinGrid& a, const BinGrid& b) {
  if (a.windows.size() != b.windows.size() || a.cells != b.cells) return false;
  for (std::size_t i = 0; i < a.windows.size(); ++i)
    if (a.windows[i].begin != b.windows[i].begin || a.windows[i].end != b.windows[i].end) return false;
  return a.lower == b.lower && a.upper == b.upper;
}

// First and second derivative weights of the quadratic through (x0, x1, x2), at x1.
struct ThreePoint {
  double d1[3];
  double d2[3];
};

ThreePoint three_point(double x0, double x1, double x2) {
  ThreePoint w{};
  const double a = (x0 - x1) * (x0 - x2), b = (x1 - x0) * (x1 - x2), c = (x2 - x0) * (x2 - x1);
  w.d1[0] = (x1 - x2) / a;
  w.d1[1] = (2.0 * x1 - x0 - x2) / b;
  w.d1[2] = (x1 - x0) / c;
  w.d2[0] = 2.0 / a;
  w.d2[1] = 2.0 / b;
  w.d2[2] = 2.0 / c;
  return w;
}

// Spatial and temporal derivatives of the current and osmotic fields on the bin grid.
struct BinDerivatives {
  Mat j1;           // ∂_i w₁^k at (k, i)
  Mat j2;           // ∂_i w₂^k
  Mat second2;      // ∂_i² w₂^k
  Vec dt1;          // ∂_t w₁
};

std::optional<BinDerivatives> bin_derivatives(const MeanDerivativeField& field, std::size_t bin,
                                              std::string& why) {
  const BinGrid& grid = field.forward.grid;
  const std::size_t cells = grid.spatial_bins();
  const std::size_t cell = bin % cells, window = bin / cells;
  const int d = grid.dimension();
  BinDerivatives out{Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d), Vec::Zero(d)};
  for (int axis = 0; axis < d; ++axis) {
    const auto lo = grid.neighbour(cell, axis, -1), hi = grid.neighbour(cell, axis, +1);
    if (!lo || !hi || !field.populated(window * cells + *lo) || !field.populated(window * cells + *hi)) {
      why = "bin " + std::to_string(bin) + " lacks populated neighbours along axis " + std::to_string(axis);
      return std::nullopt;
    }
    const std::size_t b0 = window * cells + *lo, b2 = window * cells + *hi;
    const ThreePoint w = three_point(field.position(b0)[axis], field.position(bin)[axis], field.position(b2)[axis]);
    out.j1.col(axis) = w.d1[0] * field.current[b0] + w.d1[1] * field.current[bin] + w.d1[2] * field.current[b2];
    out.j2.col(axis) = w.d1[0] * field.osmotic[b0] + w.d1[1] * field.osmotic[bin] + w.d1[2] * field.osmotic[b2];
    out.second2.col(axis) =
        w.d2[0] * field.osmotic[b0] + w.d2[1] * field.osmotic[bin] + w.d2[2] * field.osmotic[b2];
  }
  if (grid.windows.size() > 1) {
    // Neighbouring windows have their own mean positions; shift their values
    // back to this bin's position along the spatial Jacobian first.
    const auto shifted = [&](std::size_t other) -> Vec {
      return field.current[other] - out.j1 * (field.position(other) - field.position(bin));
    };
    const bool has_prev = window > 0 && field.populated(bin - cells);
    const bool has_next = window + 1 < grid.windows.size() && field.populated(bin + cells);
    if (has_prev && has_next) {
      const ThreePoint w = three_point(field.time(bin - cells), field.time(bin), field.time(bin + cells));
      out.dt1 = w.d1[0] * shifted(bin - cells) + w.d1[1] * field.current[bin] + w.d1[2] * shifted(bin + cells);
    } else if (has_prev || has_next) {
      const std::size_t other = has_prev ? bin - cells : bin + cells;
      out.dt1 = (shifted(other) - field.current[bin]) / (field.time(other) - field.time(bin));
    } else {
      why = "bin " + std::to_string(bin) + " has no populated neighbour in time";
      return std::nullopt;
    }
  }
  return out;
}

template <class Formula>
AccelerationField acceleration(const MeanDerivativeField& field, const std::string& method, Formula&& formula) {
  AccelerationField out;
  out.method = method;
  out.grid = field.forward.grid;
  const std::size_t n = field.size();
  const int d = out.grid.dimension();
  out.value.assign(n, Vec::Constant(d, kNaN));
  out.valid.assign(n, false);
  out.position.resize(n);
  out.time.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    out.position[b] = field.position(b);
    out.time[b] = field.time(b);
    if (!field.populated(b)) continue;
    std::string why;
    const auto deriv = bin_derivatives(field, b, why);
    if (!deriv) {
      out.warnings.push_back(why);
      continue;
    }
    out.value[b] = formula(b, *deriv);
    out.valid[b] = out.value[b].allFinite();
    if (!out.valid[b]) out.warnings.push_back("bin " + std::to_string(b) + " gave a non-finite acceleration");
  }
  return out;
}

}  // namespace

std::size_t BinGrid::spatial_bins() const noexcept {
  std::size_t n = 1;
  for (int c : cells) n *= static_cast<std::size_t>(std::max(c, 0));
  return n;
}

std::optional<std::size_t> BinGrid::cell(const double* x) const noexcept {
  std::size_t index = 0;
  for (int j = 0; j < dimension(); ++j) {
    if (!(x[j] >= lower[j] && x[j] < upper[j])) return std::nullopt;
    const double u = (x[j] - lower[j]) / (upper[j] - lower[j]) * cells[j];
    const int i = std::min(cells[j] - 1, static_cast<int>(u));
    index = index * static_cast<std::size_t>(cells[j]) + static_cast<std::size_t>(i);
  }
  return index;
}

std::vector<int> BinGrid::cell_index(std::size_t cell) const {
  std::vector<int> idx(cells.size());
  for (int j = dimension() - 1; j >= 0; --j) {
    idx[j] = static_cast<int>(cell % static_cast<std::size_t>(cells[j]));
    cell /= static_cast<std::size_t>(cells[j]);
  }
  return idx;
}

std::optional<std::size_t> BinGrid::neighbour(std::size_t cell, int axis, int offset) const {
  auto idx = cell_index(cell);
  idx[axis] += offset;
  if (idx[axis] < 0 || idx[axis] >= cells[axis]) return std::nullopt;
  std::size_t out = 0;
  for (int j = 0; j < dimension(); ++j) out = out * static_cast<std::size_t>(cells[j]) + idx[j];
  return out;
}

Vec BinGrid::cell_center(std::size_t cell) const {
  const auto idx = cell_index(cell);
  Vec c(dimension());
  for (int j = 0; j < dimension(); ++j) c[j] = lower[j] + (idx[j] + 0.5) * (upper[j] - lower[j]) / cells[j];
  return c;
}

void BinGrid::validate() const {
  if (cells.empty()) throw ParameterError("bin grid needs at least one spatial axis");
  if (lower.size() != dimension() || upper.size() != dimension())
    throw ParameterError("bin grid bounds do not match its number of axes");
  for (int j = 0; j < dimension(); ++j) {
    if (cells[j] < 1) throw ParameterError("bin grid axis " + std::to_string(j) + " has no cells");
    if (!(upper[j] > lower[j])) throw ParameterError("bin grid axis " + std::to_string(j) + " has upper <= lower");
  }
  if (windows.empty()) throw ParameterError("bin grid has no time windows");
  for (const auto& w : windows)
    if (w.end <= w.begin) throw ParameterError("empty time window");
}

std::vector<TimeWindow> windows_at(const PathEnsemble& ensemble, const std::vector<double>& times) {
  std::vector<TimeWindow> out;
  for (double t : times) {
    const double k = std::round(t / ensemble.dt());
    if (k < 0 || k > static_cast<double>(ensemble.steps()))
      throw ParameterError("time " + std::to_string(t) + " lies outside the ensemble");
    const auto s = static_cast<std::size_t>(k);
    out.push_back({s, s + 1});
  }
  return out;
}

void EstimatorConfig::validate() const {
  grid.validate();
  if (min_count < 2) throw ParameterError("min_count must be at least 2");
  if (lag < 1) throw ParameterError("lag must be at least 1");
}

std::size_t BinEstimates::populated_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t b = 0; b < size(); ++b) n += populated(b);
  return n;
}

Mat BinEstimates::matrix(std::size_t bin) const {
  const int d = static_cast<int>(std::lround(std::sqrt(components)));
  return Eigen::Map<const Mat>(mean[bin].data(), d, d);
}

Mat BinEstimates::matrix_error(std::size_t bin) const {
  const int d = static_cast<int>(std::lround(std::sqrt(components)));
  return Eigen::Map<const Mat>(standard_error[bin].data(), d, d);
}

BinEstimates estimate_forward(const PathEnsemble& ensemble, const EstimatorConfig& config) {
  return difference_quotient(ensemble, config, Direction::forward);
}

BinEstimates estimate_backward(const PathEnsemble& ensemble, const EstimatorConfig& config) {
  return difference_quotient(ensemble, config, Direction::backward);
}

MeanDerivativeField velocity_fields(const BinEstimates& forward, const BinEstimates& backward) {
  if (!same_grid(forward.grid, backward.grid) || forward.components != backward.components)
    throw ParameterError("forward and backward estimates live on different grids");
  MeanDerivativeField out{forward, backward, {}, {}, {}};
  const std::size_t n = forward.size();
  out.current.resize(n);
  out.osmotic.resize(n);
  out.standard_error.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    out.current[b] = 0.5 * (forward.mean[b] + backward.mean[b]);
    out.osmotic[b] = 0.5 * (forward.mean[b] - backward.mean[b]);
    out.standard_error[b] = 0.5 * (forward.standard_error[b].array().square() +
                                   backward.standard_error[b].array().square())
                                      .sqrt()
                                      .matrix();
  }
  return out;
}

AccelerationField mean_acceleration(const MeanDerivativeField& field, double epsilon) {
  const double half_eps2 = 0.5 * epsilon * epsilon;
  return acceleration(field, "composition", [&](std::size_t b, const BinDerivatives& dv) -> Vec {
    const Vec& w1 = field.current[b];
    const Vec& w2 = field.osmotic[b];
    const Vec laplacian = dv.second2.rowwise().sum();
    return dv.dt1 + dv.j1 * w1 - dv.j2 * w2 - half_eps2 * laplacian;
  });
}

AccelerationField acceleration_decomposed(const MeanDerivativeField& field, const geometry::MetricChart& chart,
                                          double epsilon) {
  if (chart.dimension() != field.forward.grid.dimension())
    throw ParameterError("chart dimension does not match the field");
  const double half_eps2 = 0.5 * epsilon * epsilon;
  return acceleration(field, "decomposition", [&](std::size_t b, const BinDerivatives& dv) -> Vec {
    const Vec& x = field.position(b);
    const Vec& w1 = field.current[b];
    const Vec& w2 = field.osmotic[b];
    const Mat inv = chart.inverse_metric(x);
    if ((inv - Mat(inv.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-12 * inv.cwiseAbs().maxCoeff())
      throw ParameterError("binned Laplace-Beltrami needs a diagonal metric");
    const auto gamma = geometry::christoffel(chart, x);
    const Vec trace = geometry::contracted_christoffel(chart, x);
    const Vec symmetric = dv.dt1 + dv.j1 * w1 + gamma.contract(w1, w1);
    const Vec laplace = dv.second2 * inv.diagonal() - dv.j2 * trace;
    const Vec antisymmetric = dv.j2 * w2 + gamma.contract(w2, w2) + half_eps2 * laplace;
    return symmetric - antisymmetric;
  });
}

BinEstimates covariant_mean_derivative(const geometry::MetricChart& chart, const PathEnsemble& ensemble,
                                       const TimeVectorField& field, Direction direction,
                                       const EstimatorConfig& config) {
  if (chart.dimension() != ensemble.dimension()) throw ParameterError("chart dimension does not match the ensemble");
  const int d = ensemble.dimension();
  const std::size_t lag = config.lag;
  const double tau = static_cast<double>(lag) * ensemble.dt();
  const bool flat = is_flat(chart);
  return accumulate(ensemble, config, d, [&](std::size_t path, std::size_t k, double* out) {
    const bool fwd = direction == Direction::forward;
    if (fwd ? k + lag > ensemble.steps() : k < lag) return false;
    const std::size_t other = fwd ? k + lag : k - lag;
    const Vec here = ensemble.state(path, k);
    Vec there = field(ensemble.time(other), ensemble.state(path, other));
    if (!flat) {
      Mat segment(lag + 1, d);
      for (std::size_t s = 0; s <= lag; ++s) segment.row(s) = ensemble.state(path, fwd ? other - s : other + s);
      for (std::size_t s = 0; s <= lag; ++s)
        if (!chart.contains(segment.row(s).transpose())) return false;
      there = stochastic::parallel_transport(chart, segment, there).back();
    }
    const Vec value = field(ensemble.time(k), here);
    const Vec q = fwd ? Vec((there - value) / tau) : Vec((value - there) / tau);
    for (int j = 0; j < d; ++j) out[j] = q[j];
    return q.allFinite();
  });
}

Vec covariant_mean_derivative_analytic(const geometry::MetricChart& chart, const TimeVectorField& field,
                                       const TimeVectorField& drift, double epsilon, Direction direction, double t,
                                       const Vec& x) {
  const double h = 1e-5 * std::max(1.0, std::abs(t));
  const Vec dt = (field(t + h, x) - field(t - h, x)) / (2.0 * h);
  const VectorField at_t = [&](const Vec& y) { return field(t, y); };
  const Vec advect = geometry::covariant_derivative(geometry::levi_civita(chart), drift(t, x), at_t, x);
  const Vec laplace = geometry::vector_laplacian(chart, at_t, x);
  const double sign = direction == Direction::forward ? 1.0 : -1.0;
  return dt + advect + sign * 0.5 * epsilon * epsilon * laplace;
}

BinEstimates quadratic_variation_matrix(const PathEnsemble& ensemble, const EstimatorConfig& config,
                                        Direction direction) {
  require_lorentzian(ensemble, config);
  const int d = ensemble.dimension();
  const std::size_t lag = config.lag;
  const double tau = static_cast<double>(lag) * ensemble.dt();
  return accumulate(ensemble, config, d * d, [&](std::size_t path, std::size_t k, double* out) {
    const bool fwd = direction == Direction::forward;
    if (fwd ? k + lag > ensemble.steps() : k < lag) return false;
    const double* a = ensemble.point(path, fwd ? k : k - lag);
    const double* b = ensemble.point(path, fwd ? k + lag : k);
    if (!keep(config, a, b, d)) return false;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) out[j * d + i] = (b[i] - a[i]) * (b[j] - a[j]) / tau;
    return true;
  });
}

BinEstimates bin_average(const PathEnsemble& ensemble, const EstimatorConfig& config, int components,
                         const TimeVectorField& f) {
  return accumulate(ensemble, config, components, [&](std::size_t path, std::size_t k, double* out) {
    if (k + config.lag > ensemble.steps()) return false;
    const Vec v = f(ensemble.time(k), ensemble.state(path, k));
    std::copy_n(v.data(), components, out);
    return true;
  });
}

std::vector<Vec> ricci_correction(const geometry::MetricChart& chart, const MeanDerivativeField& field,
                                  double hbar_over_m) {
  std::vector<Vec> out(field.size(), Vec::Constant(chart.dimension(), kNaN));
  for (std::size_t b = 0; b < field.size(); ++b) {
    if (!field.populated(b)) continue;
    const Vec& x = field.position(b);
    out[b] = 0.5 * hbar_over_m * chart.inverse_metric(x) * geometry::ricci(chart, x) * field.osmotic[b];
  }
  return out;
}

double spacelike_fraction(const PathEnsemble& ensemble, std::size_t lag) {
  if (lag < 1 || ensemble.steps() < lag) throw ParameterError("ensemble is shorter than the lag");
  const int d = ensemble.dimension();
  struct Tally {
    std::size_t spacelike = 0, total = 0;
  };
  const Tally t = parallel_reduce<Tally>(
      ensemble.paths(), [] { return Tally{}; },
      [&](Tally& p, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
          for (std::size_t k = 0; k + lag <= ensemble.steps(); ++k) {
            p.spacelike += interval(ensemble.point(i, k), ensemble.point(i, k + lag), d) > 0.0;
            ++p.total;
          }
      },
      [](Tally& a, const Tally& b) {
        a.spacelike += b.spacelike;
        a.total += b.total;
      });
  return static_cast<double>(t.spacelike) / static_cast<double>(t.total);
}

PathEnsemble time_reversed(const PathEnsemble& ensemble) {
  PathEnsemble out(ensemble.paths(), ensemble.steps(), ensemble.dimension(), ensemble.dt());
  out.seed = ensemble.seed;
  out.chart_name = ensemble.chart_name;
  out.epsilon = ensemble.epsilon;
  out.drift_name = ensemble.drift_name;
  const int d = ensemble.dimension();
  for (std::size_t i = 0; i < ensemble.paths(); ++i)
    for (std::size_t k = 0; k <= ensemble.steps(); ++k)
      std::copy_n(ensemble.point(i, ensemble.steps() - k), d, out.point(i, k));
  return out;
}

void write_field_csv(const MeanDerivativeField& field, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ParameterError("cannot write " + file.string());
  const int d = field.forward.grid.dimension();
  os << "t";
  for (int j = 0; j < d; ++j) os << ",x" << j;
  os << ",count";
  for (const char* tag : {"D+_", "D-_", "w1_", "w2_", "se_"})
    for (int j = 0; j < d; ++j) os << ',' << tag << j;
  os << '\n';
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t b = 0; b < field.size(); ++b) {
    if (!field.populated(b)) continue;
    std::snprintf(buf, sizeof buf, "%.17g", field.time(b));
    os << buf;
    for (int j = 0; j < d; ++j) put(field.position(b)[j]);
    os << ',' << std::min(field.forward.count[b], field.backward.count[b]);
    for (const Vec* v : {&field.forward.mean[b], &field.backward.mean[b], &field.current[b], &field.osmotic[b],
                         &field.standard_error[b]})
      for (int j = 0; j < d; ++j) put((*v)[j]);
    os << '\n';
  }
}

nlohmann::json config_manifest(const EstimatorConfig& config) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : config.grid.windows) windows.push_back({w.begin, w.end});
  const char* split[] = {"off", "timelike", "spacelike"};
  return {{"windows", windows},
          {"lower", std::vector<double>(config.grid.lower.data(), config.grid.lower.data() + config.grid.lower.size())},
          {"upper", std::vector<double>(config.grid.upper.data(), config.grid.upper.data() + config.grid.upper.size())},
          {"cells", config.grid.cells},
          {"min_count", config.min_count},
          {"lag", config.lag},
          {"causal_split", split[static_cast<int>(config.causal_split)]}};
}

}  // namespace fractoid::meanderiv
