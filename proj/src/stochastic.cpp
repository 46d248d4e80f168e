#include "fractoid/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fractoid/error.hpp"
#include "fractoid/parallel.hpp"
#include "fractoid/stats.hpp"

namespace fractoid::stochastic {

namespace {

constexpr std::size_t kMaxValues = 300'000'000;  // 2.4 GB of doubles
constexpr int kMaxRetries = 100;
constexpr std::size_t kRenormalizeEvery = 100;
constexpr double kDefectLimit = 1e-3;
// Largest connection rotation per frame-transport sub-step.
constexpr double kMaxTurn = 0.05;
// Retry draws live in their own index range so they never alias the base increments.
constexpr std::uint64_t kRetryOffset = std::uint64_t{1} << 59;

std::string where(std::size_t path, std::size_t step) {
  return "path " + std::to_string(path) + ", step " + std::to_string(step);
}

std::string describe(const Vec& x) {
  std::ostringstream out;
  out.precision(6);
  out << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? ", " : "") << x[i];
  out << ')';
  return out.str();
}

void check_grid(double horizon, double dt, std::size_t n_paths) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("T must be positive");
  if (n_paths == 0) throw ParameterError("N must be at least 1");
}

// Drives `step(path, k, t, x, stream)` over every path in parallel, recording
// every options.record_every-th state.
template <class Step>
PathEnsemble integrate(const Vec& x0, int dimension, double horizon, double dt, std::size_t n_paths,
                       std::uint64_t seed, const SimulationOptions& options, Step&& step) {
  check_grid(horizon, dt, n_paths);
  if (!options.initial && x0.size() != dimension)
    throw ParameterError("x0 has " + std::to_string(x0.size()) + " coordinates, expected " +
                         std::to_string(dimension));
  const std::size_t k_total = step_count(horizon, dt);
  const std::size_t every = std::max<std::size_t>(options.record_every, 1);
  if (k_total % every != 0) throw ParameterError("record_every must divide the number of steps");
  const std::size_t recorded = k_total / every;
  const double values = static_cast<double>(n_paths) * static_cast<double>(recorded + 1) * dimension;
  if (values > static_cast<double>(kMaxValues))
    throw ResourceError("ensemble of " + std::to_string(n_paths) + " paths × " + std::to_string(recorded + 1) +
                        " points exceeds the memory cap");
  PathEnsemble out(n_paths, recorded, dimension, dt * static_cast<double>(every));
  out.seed = seed;
  parallel_chunks(n_paths, 64, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const NormalStream stream(seed, i);
      Vec x = options.initial ? options.initial(i, stream) : x0;
      if (x.size() != dimension) throw ParameterError("initial sampler returned the wrong dimension");
      std::copy(x.data(), x.data() + dimension, out.point(i, 0));
      for (std::size_t k = 0; k < k_total; ++k) {
        step(i, k, static_cast<double>(k) * dt, x, stream);
        if (!x.allFinite()) throw SimulationError("non-finite state at " + where(i, k + 1));
        if ((k + 1) % every == 0) std::copy(x.data(), x.data() + dimension, out.point(i, (k + 1) / every));
      }
    }
  });
  return out;
}

Vec checked(const Vec& v, int dimension, const char* what, std::size_t path, std::size_t k) {
  if (v.size() != dimension)
    throw ParameterError(std::string(what) + " returned " + std::to_string(v.size()) + " components, expected " +
                         std::to_string(dimension));
  if (!v.allFinite()) throw SimulationError(std::string(what) + " is not finite at " + where(path, k));
  return v;
}

}  // namespace

PathEnsemble::PathEnsemble(std::size_t paths, std::size_t steps, int dimension, double dt)
    : paths_(paths), steps_(steps), dimension_(dimension), dt_(dt) {
  if (dimension <= 0) throw ParameterError("ensemble dimension must be positive");
  data_.assign(paths * (steps + 1) * static_cast<std::size_t>(dimension), 0.0);
}

Vec PathEnsemble::state(std::size_t path, std::size_t k) const {
  return Eigen::Map<const Vec>(point(path, k), dimension_);
}

Mat PathEnsemble::path(std::size_t path) const {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(point(path, 0), static_cast<Eigen::Index>(steps_ + 1), dimension_);
}

std::size_t step_count(double horizon, double dt) {
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ParameterError("T must be a positive multiple of dt");
  return static_cast<std::size_t>(rounded);
}

std::vector<double> wiener_increments(std::size_t n_steps, double dt, int dimension, std::uint64_t seed,
                                      std::uint64_t stream) {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  if (dimension <= 0) throw ParameterError("dimension must be positive");
  std::vector<double> out(n_steps * static_cast<std::size_t>(dimension));
  NormalStream(seed, stream).fill(rng_offset::increments, out.data(), out.size());
  const double scale = std::sqrt(dt);
  for (double& v : out) v *= scale;
  return out;
}

PathEnsemble simulate_ito(const ItoProcessSpec& spec, const Vec& x0, double horizon, double dt, std::size_t n_paths,
                          std::uint64_t seed, const SimulationOptions& options) {
  if (!(spec.diffusion_const >= 0.0)) throw ParameterError("diffusion constant must be non-negative");
  if (!spec.drift) throw ParameterError("Itô spec has no drift");
  const int d = spec.dimension;
  const bool field = static_cast<bool>(spec.diffusion_field);
  const int m = field ? spec.noise_dimension : d;
  if (m <= 0) throw ParameterError("noise dimension must be positive");
  const double root_dt = std::sqrt(dt);
  auto out = integrate(x0, d, horizon, dt, n_paths, seed, options,
                       [&](std::size_t i, std::size_t k, double t, Vec& x, const NormalStream& stream) {
                         Vec dw(m);
                         stream.fill(k * static_cast<std::uint64_t>(m), dw.data(), static_cast<std::size_t>(m));
                         dw *= root_dt;
                         const Vec drift = checked(spec.drift(t, x), d, "drift", i, k);
                         if (field) {
                           const Mat g = spec.diffusion_field(t, x);
                           if (g.rows() != d || g.cols() != m)
                             throw ParameterError("diffusion field has the wrong shape");
                           x += drift * dt + g * dw;
                         } else {
                           x += drift * dt + spec.diffusion_const * dw;
                         }
                       });
  out.epsilon = field ? 0.0 : spec.diffusion_const;
  out.drift_name = spec.drift_name;
  out.chart_name = "euclidean:" + std::to_string(d);
  return out;
}

PathEnsemble simulate_stratonovich(const StratonovichSpec& spec, const Vec& x0, double horizon, double dt,
                                   std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options) {
  if (!spec.drift || !spec.diffusion) throw ParameterError("Stratonovich spec needs drift and diffusion");
  const int d = spec.dimension;
  const int m = spec.noise_dimension;
  if (m <= 0) throw ParameterError("noise dimension must be positive");
  const double root_dt = std::sqrt(dt);
  auto shape = [&](const Mat& g) {
    if (g.rows() != d || g.cols() != m) throw ParameterError("diffusion field has the wrong shape");
    if (!g.allFinite()) throw SimulationError("diffusion field is not finite");
    return g;
  };
  auto out = integrate(x0, d, horizon, dt, n_paths, seed, options,
                       [&](std::size_t i, std::size_t k, double t, Vec& x, const NormalStream& stream) {
                         Vec dw(m);
                         stream.fill(k * static_cast<std::uint64_t>(m), dw.data(), static_cast<std::size_t>(m));
                         dw *= root_dt;
                         const Vec f0 = checked(spec.drift(t, x), d, "drift", i, k);
                         const Mat g0 = shape(spec.diffusion(t, x));
                         const Vec predictor = x + f0 * dt + g0 * dw;
                         const Vec f1 = checked(spec.drift(t + dt, predictor), d, "drift", i, k);
                         const Mat g1 = shape(spec.diffusion(t + dt, predictor));
                         x += 0.5 * (f0 + f1) * dt + 0.5 * (g0 + g1) * dw;
                       });
  out.drift_name = spec.drift_name;
  out.chart_name = "euclidean:" + std::to_string(d);
  return out;
}

PathEnsemble simulate_manifold_diffusion(const geometry::MetricChart& chart, const TimeVectorField& drift,
                                         const Vec& x0, double horizon, double dt, std::size_t n_paths,
                                         std::uint64_t seed, double epsilon, const SimulationOptions& options) {
  if (!(epsilon >= 0.0)) throw ParameterError("epsilon must be non-negative");
  const int d = chart.dimension();
  if (!options.initial && !chart.contains(x0))
    throw DomainError("chart '" + chart.name() + "': x0 " + describe(x0) + " outside the valid region");
  const double root_dt = std::sqrt(dt);
  const double half_eps2 = 0.5 * epsilon * epsilon;
  auto out = integrate(
      x0, d, horizon, dt, n_paths, seed, options,
      [&](std::size_t i, std::size_t k, double t, Vec& x, const NormalStream& stream) {
        Vec w = drift ? checked(drift(t, x), d, "drift", i, k) : Vec::Zero(d);
        const Vec mean = x + (w - half_eps2 * geometry::contracted_christoffel(chart, x)) * dt;
        const Mat y = epsilon * geometry::inverse_metric_sqrt(chart, x);
        Vec dw(d);
        for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
          const std::uint64_t first =
              attempt == 0 ? k * static_cast<std::uint64_t>(d)
                           : kRetryOffset + (k * kMaxRetries + static_cast<std::uint64_t>(attempt - 1)) * d;
          stream.fill(first, dw.data(), static_cast<std::size_t>(d));
          const Vec candidate = mean + y * (root_dt * dw);
          if (chart.contains(candidate)) {
            x = candidate;
            return;
          }
        }
        throw BoundaryError("chart '" + chart.name() + "': " + std::to_string(kMaxRetries) +
                            " redraws all left the valid region from " + describe(x) + " at " + where(i, k));
      });
  out.epsilon = epsilon;
  out.chart_name = chart.name();
  out.drift_name = drift ? "custom" : "zero";
  return out;
}

std::vector<Vec> parallel_transport(const geometry::MetricChart& chart, const Mat& path, const Vec& v0) {
  const int d = chart.dimension();
  if (path.cols() != d) throw ParameterError("path dimension does not match the chart");
  if (v0.size() != d) throw ParameterError("v0 dimension does not match the chart");
  if (path.rows() == 0) return {};
  const Mat identity = Mat::Identity(d, d);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(path.rows()));
  Vec v = v0;
  out.push_back(v);
  for (Eigen::Index k = 0; k + 1 < path.rows(); ++k) {
    const Vec a = path.row(k).transpose();
    const Vec b = path.row(k + 1).transpose();
    const Mat half = 0.5 * geometry::christoffel(chart, 0.5 * (a + b)).along(b - a);
    v = (identity + half).partialPivLu().solve((identity - half) * v);
    out.push_back(v);
  }
  return out;
}

double rotation_angle(const geometry::MetricChart& chart, const Vec& x, const Vec& a, const Vec& b) {
  if (chart.dimension() != 2) throw ParameterError("rotation_angle needs a 2-D chart");
  const Mat g = chart.metric(x);
  const Vec scale = g.diagonal().cwiseAbs().cwiseSqrt();
  const Vec oa = a.cwiseProduct(scale);
  const Vec ob = b.cwiseProduct(scale);
  double angle = std::atan2(oa[0] * ob[1] - oa[1] * ob[0], oa.dot(ob));
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  return angle;
}

double orthonormality_defect(const geometry::MetricChart& chart, const FrameState& s) {
  const Mat gram = s.frame.transpose() * chart.metric(s.base_point) * s.frame;
  return (gram - chart.signature_matrix()).cwiseAbs().maxCoeff();
}

void orthonormalize(const geometry::MetricChart& chart, FrameState& s) {
  const Mat g = chart.metric(s.base_point);
  const Mat eta = chart.signature_matrix();
  for (Eigen::Index a = 0; a < s.frame.cols(); ++a) {
    Vec u = s.frame.col(a);
    for (Eigen::Index b = 0; b < a; ++b) {
      const Vec e = s.frame.col(b);
      u -= eta(b, b) * (e.dot(g * u)) * e;
    }
    const double norm = std::sqrt(std::abs(u.dot(g * u)));
    if (!(norm > 0.0)) throw InstabilityError("frame collapsed during Gram–Schmidt");
    s.frame.col(a) = u / norm;
  }
}

Mat FrameEnsemble::frame(std::size_t path, std::size_t k) const {
  const int d = base.dimension();
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  return Eigen::Map<const Mat>(frames.data() + (path * (base.steps() + 1) + k) * dd, d, d);
}

FrameEnsemble frame_bundle_simulate(const geometry::MetricChart& chart, const FrameState& initial, double horizon,
                                    double dt, std::size_t n_paths, std::uint64_t seed,
                                    const SimulationOptions& options) {
  check_grid(horizon, dt, n_paths);
  const int d = chart.dimension();
  if (initial.frame.rows() != d || initial.frame.cols() != d) throw ParameterError("frame must be d × d");
  if (!chart.contains(initial.base_point)) throw DomainError("frame base point outside the valid region");
  if (orthonormality_defect(chart, initial) > 1e-6)
    throw ParameterError("initial frame is not orthonormal with respect to the metric");
  const std::size_t k_total = step_count(horizon, dt);
  const std::size_t every = std::max<std::size_t>(options.record_every, 1);
  if (k_total % every != 0) throw ParameterError("record_every must divide the number of steps");
  const std::size_t recorded = k_total / every;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  if (static_cast<double>(n_paths) * static_cast<double>(recorded + 1) * static_cast<double>(d + dd) >
      static_cast<double>(kMaxValues))
    throw ResourceError("frame ensemble exceeds the memory cap");

  FrameEnsemble out{PathEnsemble(n_paths, recorded, d, dt * static_cast<double>(every)), {}, 0.0};
  out.base.seed = seed;
  out.base.chart_name = chart.name();
  out.base.epsilon = 1.0;
  out.base.drift_name = "horizontal";
  out.frames.assign(n_paths * (recorded + 1) * dd, 0.0);
  const double root_dt = std::sqrt(dt);

  auto transport_rate = [&](const Vec& x, const Mat& e, const Vec& dx) -> Mat {
    return -geometry::christoffel(chart, x).along(dx) * e;
  };
  const Mat identity = Mat::Identity(d, d);

  std::vector<double> worst(n_paths, 0.0);
  parallel_chunks(n_paths, 16, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const NormalStream stream(seed, i);
      FrameState s = initial;
      auto record = [&](std::size_t slot) {
        orthonormalize(chart, s);
        const double defect = orthonormality_defect(chart, s);
        worst[i] = std::max(worst[i], defect);
        std::copy(s.base_point.data(), s.base_point.data() + d, out.base.point(i, slot));
        std::copy(s.frame.data(), s.frame.data() + dd, out.frames.data() + (i * (recorded + 1) + slot) * dd);
      };
      record(0);
      Vec dw(d);
      for (std::size_t k = 0; k < k_total; ++k) {
        bool accepted = false;
        for (int attempt = 0; attempt <= kMaxRetries && !accepted; ++attempt) {
          const std::uint64_t first =
              attempt == 0 ? k * static_cast<std::uint64_t>(d)
                           : kRetryOffset + (k * kMaxRetries + static_cast<std::uint64_t>(attempt - 1)) * d;
          stream.fill(first, dw.data(), static_cast<std::size_t>(d));
          dw *= root_dt;
          const Vec dx0 = s.frame * dw;
          const Vec x1 = s.base_point + dx0;
          if (!chart.contains(x1)) continue;
          const Mat e1 = s.frame + transport_rate(s.base_point, s.frame, dx0);
          const Vec dx1 = e1 * dw;
          const Vec x2 = s.base_point + 0.5 * (dx0 + dx1);
          if (!chart.contains(x2)) continue;
          // Frame follows the realised step by implicit-midpoint transport,
          // sub-stepped where the connection turns the frame quickly.
          const Vec step = x2 - s.base_point;
          const double turn =
              geometry::christoffel(chart, s.base_point + 0.5 * step).along(step).cwiseAbs().maxCoeff();
          const int pieces = std::max(1, static_cast<int>(std::ceil(turn / kMaxTurn)));
          for (int p = 0; p < pieces; ++p) {
            const Vec mid = s.base_point + ((p + 0.5) / pieces) * step;
            const Mat half = 0.5 * geometry::christoffel(chart, mid).along(step / pieces);
            s.frame = (identity + half).partialPivLu().solve((identity - half) * s.frame);
          }
          s.base_point = x2;
          accepted = true;
        }
        if (!accepted)
          throw BoundaryError("chart '" + chart.name() + "': frame-bundle step left the valid region " +
                              std::to_string(kMaxRetries) + " times at " + where(i, k));
        if (!s.base_point.allFinite() || !s.frame.allFinite())
          throw SimulationError("non-finite frame state at " + where(i, k + 1));
        const bool output = (k + 1) % every == 0;
        if ((k + 1) % kRenormalizeEvery == 0 || output) {
          const double drift = orthonormality_defect(chart, s);
          if (drift > kDefectLimit)
            throw InstabilityError("frame orthonormality drifted by " + std::to_string(drift) + " at " + where(i, k + 1) +
                                   "; use a smaller dt");
          if (output) record((k + 1) / every);
          else orthonormalize(chart, s);
        }
      }
    }
  });
  for (double w : worst) out.max_defect = std::max(out.max_defect, w);
  return out;
}

double generator_apply(const geometry::MetricChart& chart, const VectorField& drift, const ScalarField& z,
                       const Vec& x) {
  double advection = 0.0;
  if (drift) advection = drift(x).dot(geometry::gradient(z, x));
  return 0.5 * geometry::laplace_beltrami(chart, z, x) + advection;
}

SemimartingaleDecomposition decompose_semimartingale(const Mat& path, std::size_t window) {
  if (window < 2) throw ParameterError("window must be at least 2");
  const auto points = static_cast<std::size_t>(path.rows());
  if (points < 2 || window > points - 1)
    throw ParameterError("window of " + std::to_string(window) + " exceeds the " +
                         std::to_string(points > 0 ? points - 1 : 0) + " increments of the path");
  const std::size_t n = points - 1;
  const Mat increments = path.bottomRows(n) - path.topRows(n);
  // prefix[k] = sum of increments before k, for O(1) window means.
  Mat prefix = Mat::Zero(static_cast<Eigen::Index>(n + 1), path.cols());
  for (std::size_t k = 0; k < n; ++k) prefix.row(k + 1) = prefix.row(k) + increments.row(k);
  SemimartingaleDecomposition out;
  out.bounded_variation_part.resize(path.rows(), path.cols());
  out.martingale_part.resize(path.rows(), path.cols());
  out.bounded_variation_part.row(0) = path.row(0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = std::min(k >= window / 2 ? k - window / 2 : 0, n - window);
    const auto local_mean = (prefix.row(lo + window) - prefix.row(lo)) / static_cast<double>(window);
    out.bounded_variation_part.row(k + 1) = out.bounded_variation_part.row(k) + local_mean;
  }
  double residual = 0.0;
  for (Eigen::Index k = 0; k < path.rows(); ++k)
    for (Eigen::Index j = 0; j < path.cols(); ++j) {
      const double bv = out.bounded_variation_part(k, j);
      const double target = path(k, j);
      double m = target - bv;
      // Correct the remainder until the rounded sum reproduces the input exactly.
      for (int pass = 0; pass < 4 && bv + m != target; ++pass) m += target - (bv + m);
      for (int nudge = 0; nudge < 64 && bv + m != target; ++nudge)
        m = std::nextafter(m, bv + m < target ? INFINITY : -INFINITY);
      out.martingale_part(k, j) = m;
      residual = std::max(residual, std::abs(bv + m - target));
    }
  out.residual = residual;
  return out;
}

FractalScalingReport fractal_scaling(const PathEnsemble& ensemble, const std::vector<std::size_t>& scales,
                                     double reference_time) {
  if (scales.size() < 4) throw ParameterError("fractal_scaling needs at least 4 scales");
  if (!(reference_time > 0.0)) throw ParameterError("reference time must be positive");
  const std::size_t k_total = ensemble.steps();
  const int d = ensemble.dimension();
  for (std::size_t m : scales)
    if (m == 0 || m > k_total) throw ParameterError("scale " + std::to_string(m) + " outside the path grid");

  FractalScalingReport report;
  report.reference_time = reference_time;
  std::vector<double> log_dt, log_len;
  for (std::size_t m : scales) {
    const std::size_t segments = k_total / m;
    const double dt = static_cast<double>(m) * ensemble.dt();
    // Covered time may fall short of T when m does not divide K; rescale to the full horizon.
    const double coverage = static_cast<double>(k_total) / static_cast<double>(segments * m);
    auto total = parallel_reduce<stats::RunningStats>(
        ensemble.paths(), [] { return stats::RunningStats{}; },
        [&](stats::RunningStats& acc, std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            double length = 0.0;
            for (std::size_t s = 0; s < segments; ++s) {
              const double* a = ensemble.point(i, s * m);
              const double* b = ensemble.point(i, (s + 1) * m);
              double sq = 0.0;
              for (int j = 0; j < d; ++j) sq += (b[j] - a[j]) * (b[j] - a[j]);
              length += std::sqrt(sq);
            }
            acc.add(length * coverage);
          }
        },
        [](stats::RunningStats& into, const stats::RunningStats& from) { into.merge(from); });
    report.scales.push_back(dt);
    report.lengths.push_back(total.mean());
    if (!(total.mean() > 0.0)) throw ParameterError("paths have zero length at scale " + std::to_string(m));
    log_dt.push_back(std::log(dt));
    log_len.push_back(std::log(total.mean()));
  }
  const auto fit = stats::fit_line(log_dt, log_len);
  report.fitted_slope = fit.slope;
  report.fitted_dimension = 1.0 / (1.0 + fit.slope);
  report.dimension_stderr = fit.slope_stderr / ((1.0 + fit.slope) * (1.0 + fit.slope));

  // RMS amplitudes of rising and falling increments, normalised by (δt/τ)^{1/D_f}.
  stats::RunningStats plus, minus;
  for (std::size_t idx = 0; idx < scales.size(); ++idx) {
    const std::size_t m = scales[idx];
    const double norm = std::pow(report.scales[idx] / reference_time, 1.0 / report.fitted_dimension);
    double sum_plus = 0.0, sum_minus = 0.0;
    std::size_t n_plus = 0, n_minus = 0;
    for (std::size_t i = 0; i < ensemble.paths(); ++i)
      for (std::size_t s = 0; s + m <= k_total; s += m)
        for (int j = 0; j < d; ++j) {
          const double delta = ensemble.at(i, s + m, j) - ensemble.at(i, s, j);
          if (delta >= 0.0) {
            sum_plus += delta * delta;
            ++n_plus;
          } else {
            sum_minus += delta * delta;
            ++n_minus;
          }
        }
    if (n_plus) plus.add(std::sqrt(sum_plus / static_cast<double>(n_plus)) / norm);
    if (n_minus) minus.add(std::sqrt(sum_minus / static_cast<double>(n_minus)) / norm);
  }
  report.fluctuation_plus = plus.mean();
  report.fluctuation_minus = minus.mean();

  const double horizon = ensemble.horizon();
  double dm = 0.0, dm_var = 0.0;
  for (int j = 0; j < d; ++j) {
    stats::RunningStats disp;
    for (std::size_t i = 0; i < ensemble.paths(); ++i) disp.add(ensemble.at(i, k_total, j) - ensemble.at(i, 0, j));
    const double n = static_cast<double>(disp.count());
    dm += disp.variance() / (2.0 * horizon);
    // Var of a Gaussian sample variance: 2σ⁴/(n−1).
    if (n > 1) dm_var += 2.0 * disp.variance() * disp.variance() / (n - 1.0) / (4.0 * horizon * horizon);
  }
  report.diffusion_coefficient = dm / d;
  report.diffusion_stderr = std::sqrt(dm_var) / d;
  return report;
}

void write_csv(const PathEnsemble& e, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ResourceError("cannot write " + file.string());
  out << "path_id,step,t";
  for (int j = 0; j < e.dimension(); ++j) out << ",x" << j;
  out << '\n';
  char buffer[32];
  for (std::size_t i = 0; i < e.paths(); ++i)
    for (std::size_t k = 0; k <= e.steps(); ++k) {
      out << i << ',' << k << ',';
      std::snprintf(buffer, sizeof buffer, "%.17g", e.time(k));
      out << buffer;
      for (int j = 0; j < e.dimension(); ++j) {
        std::snprintf(buffer, sizeof buffer, "%.17g", e.at(i, k, j));
        out << ',' << buffer;
      }
      out << '\n';
    }
  if (!out) throw ResourceError("write failed for " + file.string());
}

PathEnsemble read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open ensemble file " + file.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("path_id,step,t", 0) != 0)
    throw ConfigError(file.string() + ": missing 'path_id,step,t,...' header");
  const int dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 2;
  if (dim < 1) throw ConfigError(file.string() + ": no coordinate columns");
  std::vector<double> values;
  std::size_t paths = 0, max_step = 0;
  double dt = 0.0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> parsed;
    while (std::getline(fields, cell, ',')) parsed.push_back(std::strtod(cell.c_str(), nullptr));
    if (static_cast<int>(parsed.size()) != dim + 3)
      throw ConfigError(file.string() + ": row " + std::to_string(row) + " has the wrong number of columns");
    const auto id = static_cast<std::size_t>(parsed[0]);
    const auto step = static_cast<std::size_t>(parsed[1]);
    paths = std::max(paths, id + 1);
    max_step = std::max(max_step, step);
    if (step == 1) dt = parsed[2];
    values.insert(values.end(), parsed.begin() + 3, parsed.end());
  }
  if (values.size() != paths * (max_step + 1) * static_cast<std::size_t>(dim))
    throw ConfigError(file.string() + ": ragged ensemble");
  PathEnsemble e(paths, max_step, dim, dt > 0.0 ? dt : 1.0);
  e.data() = std::move(values);
  return e;
}

nlohmann::json manifest(const PathEnsemble& e) {
  return {{"chart", e.chart_name}, {"seed", e.seed},       {"dt", e.dt()},
          {"T", e.horizon()},      {"N", e.paths()},       {"epsilon", e.epsilon},
          {"drift_name", e.drift_name}, {"dimension", e.dimension()}, {"steps", e.steps()}};
}

void write_manifest(const PathEnsemble& e, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ResourceError("cannot write " + file.string());
  out << manifest(e).dump(2) << '\n';
}

namespace {
constexpr char kMagic[8] = {'F', 'R', 'C', 'T', 'E', 'N', 'S', '1'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void write_binary(const PathEnsemble& e, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, e.paths());
  put<std::uint64_t>(out, e.steps());
  put<std::int64_t>(out, e.dimension());
  put<double>(out, e.dt());
  put<std::uint64_t>(out, e.seed);
  put<double>(out, e.epsilon);
  for (const std::string* s : {&e.chart_name, &e.drift_name}) {
    put<std::uint64_t>(out, s->size());
    out.write(s->data(), static_cast<std::streamsize>(s->size()));
  }
  out.write(reinterpret_cast<const char*>(e.data().data()),
            static_cast<std::streamsize>(e.data().size() * sizeof(double)));
  if (!out) throw ResourceError("write failed for " + file.string());
}

PathEnsemble read_binary(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError(file.string() + ": not an ensemble file");
  const auto paths = get<std::uint64_t>(in);
  const auto steps = get<std::uint64_t>(in);
  const auto dim = get<std::int64_t>(in);
  const auto dt = get<double>(in);
  if (!in || dim <= 0 || dim > 4096) throw ConfigError(file.string() + ": corrupt header");
  PathEnsemble e(paths, steps, static_cast<int>(dim), dt);
  e.seed = get<std::uint64_t>(in);
  e.epsilon = get<double>(in);
  for (std::string* s : {&e.chart_name, &e.drift_name}) {
    const auto n = get<std::uint64_t>(in);
    if (!in || n > 4096) throw ConfigError(file.string() + ": corrupt header");
    s->resize(n);
    in.read(s->data(), static_cast<std::streamsize>(n));
  }
  in.read(reinterpret_cast<char*>(e.data().data()), static_cast<std::streamsize>(e.data().size() * sizeof(double)));
  if (!in) throw ConfigError(file.string() + ": truncated data");
  return e;
}

}  // namespace fractoid::stochastic
