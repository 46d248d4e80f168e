#include "fractoid/geodesic.hpp"

#include <cmath>
#include <limits>

#include "fractoid/error.hpp"
#include "fractoid/parallel.hpp"
#include "fractoid/stats.hpp"

namespace fractoid::geodesic {

namespace {

constexpr double kVariationStep = 1e-5;

bool is_flat(const geometry::MetricChart& chart) {
  return chart.name().rfind("euclidean:", 0) == 0 || chart.name() == "minkowski:1+3";
}

double quadratic(const Mat& g, const Vec& v) { return v.dot(g * v); }

// |mean| / se, with 0/0 read as 0 for noise-free features.
double z_score(double mean, double se) {
  if (mean == 0.0) return 0.0;
  return se > 0.0 ? std::abs(mean) / se : std::numeric_limits<double>::infinity();
}

}  // namespace

Vec PathCurve::velocity(std::size_t k) const {
  const auto K = static_cast<Eigen::Index>(steps());
  const auto i = static_cast<Eigen::Index>(k);
  if (K < 2) throw ParameterError("a curve needs at least three nodes");
  if (i > K) throw ParameterError("node " + std::to_string(k) + " is past the curve's " + std::to_string(K) + " steps");
  if (i == 0) return (-3.0 * points.row(0) + 4.0 * points.row(1) - points.row(2)).transpose() / (2.0 * dt);
  if (i == K) return (3.0 * points.row(K) - 4.0 * points.row(K - 1) + points.row(K - 2)).transpose() / (2.0 * dt);
  return (points.row(i + 1) - points.row(i - 1)).transpose() / (2.0 * dt);
}

void PathCurve::validate(const geometry::MetricChart& chart) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("curve step dt must be positive and finite");
  if (points.rows() < 3) throw ParameterError("a curve needs at least three nodes");
  if (points.cols() != chart.dimension())
    throw ParameterError("curve has dimension " + std::to_string(points.cols()) + " but chart " + chart.name() +
                         " has " + std::to_string(chart.dimension()));
  if (!points.allFinite()) throw ParameterError("curve has non-finite points");
  for (Eigen::Index k = 0; k < points.rows(); ++k)
    if (!chart.contains(points.row(k).transpose()))
      throw DomainError("curve node " + std::to_string(k) + " lies outside chart " + chart.name());
}

PathCurve sample_curve(const std::function<Vec(double)>& gamma, double horizon, std::size_t steps,
                       std::string chart_name) {
  if (steps < 2) throw ParameterError("a curve needs at least two steps");
  if (!(horizon > 0.0)) throw ParameterError("curve horizon must be positive");
  PathCurve curve;
  curve.dt = horizon / static_cast<double>(steps);
  curve.chart_name = std::move(chart_name);
  const Vec first = gamma(0.0);
  curve.points.resize(static_cast<Eigen::Index>(steps + 1), first.size());
  curve.points.row(0) = first.transpose();
  for (std::size_t k = 1; k <= steps; ++k)
    curve.points.row(static_cast<Eigen::Index>(k)) = gamma(static_cast<double>(k) * curve.dt).transpose();
  return curve;
}

stochastic::PathEnsemble to_ensemble(const PathCurve& curve) {
  stochastic::PathEnsemble e(1, curve.steps(), static_cast<int>(curve.points.cols()), curve.dt);
  for (std::size_t k = 0; k <= curve.steps(); ++k)
    for (int j = 0; j < e.dimension(); ++j) e.at(0, k, j) = curve.points(static_cast<Eigen::Index>(k), j);
  e.chart_name = curve.chart_name;
  e.drift_name = "curve";
  return e;
}

PathCurve from_ensemble(const stochastic::PathEnsemble& ensemble, std::size_t path) {
  if (path >= ensemble.paths()) throw ParameterError("path index " + std::to_string(path) + " out of range");
  PathCurve curve;
  curve.dt = ensemble.dt();
  curve.points = ensemble.path(path);
  curve.chart_name = ensemble.chart_name;
  return curve;
}

double energy_functional(const geometry::MetricChart& chart, const PathCurve& curve) {
  curve.validate(chart);
  const std::size_t K = curve.steps();
  double sum = 0.0;
  for (std::size_t k = 0; k <= K; ++k) {
    const double e = quadratic(chart.metric(curve.points.row(static_cast<Eigen::Index>(k)).transpose()),
                               curve.velocity(k));
    sum += (k == 0 || k == K) ? 0.5 * e : e;
  }
  return sum * curve.dt;
}

PathCurve classical_geodesic(const geometry::MetricChart& chart, const Vec& x0, const Vec& v0, double horizon,
                             double dt) {
  const int d = chart.dimension();
  if (x0.size() != d || v0.size() != d) throw ParameterError("initial point and velocity must match the chart");
  if (!(dt > 0.0) || !(horizon > 0.0)) throw ParameterError("geodesic horizon and dt must be positive");
  if (!chart.contains(x0)) throw DomainError("geodesic starts outside chart " + chart.name());
  const std::size_t K = stochastic::step_count(horizon, dt);
  const auto accel = [&](const Vec& x, const Vec& v) -> Vec {
    return -geometry::christoffel(chart, x).contract(v, v);
  };
  PathCurve curve;
  curve.dt = dt;
  curve.chart_name = chart.name();
  curve.points.resize(static_cast<Eigen::Index>(K + 1), d);
  curve.tangent.resize(static_cast<Eigen::Index>(K + 1), d);
  curve.points.row(0) = x0.transpose();
  curve.tangent.row(0) = v0.transpose();
  Vec x = x0, v = v0;
  std::size_t k = 0;
  for (; k < K; ++k) {
    const Vec k1x = v, k1v = accel(x, v);
    const Vec x2 = x + 0.5 * dt * k1x;
    if (!chart.contains(x2)) break;
    const Vec k2x = v + 0.5 * dt * k1v, k2v = accel(x2, k2x);
    const Vec x3 = x + 0.5 * dt * k2x;
    if (!chart.contains(x3)) break;
    const Vec k3x = v + 0.5 * dt * k2v, k3v = accel(x3, k3x);
    const Vec x4 = x + dt * k3x;
    if (!chart.contains(x4)) break;
    const Vec k4x = v + dt * k3v, k4v = accel(x4, k4x);
    const Vec xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    if (!chart.contains(xn)) break;
    v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    x = xn;
    curve.points.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
    curve.tangent.row(static_cast<Eigen::Index>(k + 1)) = v.transpose();
  }
  if (k < K) {
    curve.points.conservativeResize(static_cast<Eigen::Index>(k + 1), d);
    curve.tangent.conservativeResize(static_cast<Eigen::Index>(k + 1), d);
    curve.warnings.push_back("geodesic left chart " + chart.name() + " at t = " +
                             std::to_string(static_cast<double>(k) * dt) + "; truncated to " + std::to_string(k) +
                             " steps");
  }
  return curve;
}

Mat euler_lagrange_residual(const geometry::MetricChart& chart, const PathCurve& curve,
                            const LagrangianSpec& lagrangian) {
  curve.validate(chart);
  if (!(lagrangian.mass > 0.0)) throw ParameterError("mass must be positive");
  const std::size_t K = curve.steps();
  if (K < 4) throw ParameterError("Euler-Lagrange residual needs at least four steps");
  const int d = chart.dimension();
  const double m = lagrangian.mass;
  const auto node = [&](std::size_t k) -> Vec { return curve.points.row(static_cast<Eigen::Index>(k)).transpose(); };
  const auto momentum = [&](std::size_t k) -> Vec { return m * chart.metric(node(k)) * curve.velocity(k); };
  Mat out(static_cast<Eigen::Index>(K - 3), d);
  for (std::size_t k = 2; k + 2 <= K; ++k) {
    const Vec x = node(k), v = curve.velocity(k);
    const Vec dp = (momentum(k + 1) - momentum(k - 1)) / (2.0 * curve.dt);
    const auto dg = chart.metric_derivative(x);
    Vec force(d);
    for (int l = 0; l < d; ++l) force[l] = 0.5 * m * quadratic(dg[static_cast<std::size_t>(l)], v);
    if (lagrangian.potential) force -= geometry::gradient(lagrangian.potential, x);
    out.row(static_cast<Eigen::Index>(k - 2)) = (dp - force).transpose();
  }
  return out;
}

double first_variation(const geometry::MetricChart& chart, const PathCurve& curve, const Mat& perturbation) {
  if (perturbation.rows() != curve.points.rows() || perturbation.cols() != curve.points.cols())
    throw ParameterError("perturbation shape does not match the curve");
  const double tol = 1e-12 * std::max(1.0, perturbation.cwiseAbs().maxCoeff());
  if (perturbation.row(0).cwiseAbs().maxCoeff() > tol ||
      perturbation.row(perturbation.rows() - 1).cwiseAbs().maxCoeff() > tol)
    throw ParameterError("perturbation must vanish at both endpoints");
  PathCurve plus = curve, minus = curve;
  plus.tangent.resize(0, 0);
  minus.tangent.resize(0, 0);
  plus.points += kVariationStep * perturbation;
  minus.points -= kVariationStep * perturbation;
  return (energy_functional(chart, plus) - energy_functional(chart, minus)) / (2.0 * kVariationStep);
}

StochasticEnergy stochastic_energy(const stochastic::PathEnsemble& ensemble, const geometry::MetricChart& chart,
                                   const meanderiv::EstimatorConfig& config, std::size_t k_begin, std::size_t k_end,
                                   const TimeVectorField& drift) {
  if (chart.dimension() != ensemble.dimension()) throw ParameterError("chart dimension does not match the ensemble");
  if (config.lag != 1) throw ParameterError("stochastic energy uses single-step increments (lag 1)");
  if (k_begin >= k_end || k_end > ensemble.steps())
    throw ParameterError("energy step range [" + std::to_string(k_begin) + ", " + std::to_string(k_end) +
                         ") is empty or past the ensemble's " + std::to_string(ensemble.steps()) + " steps");
  const int d = ensemble.dimension();
  const double dt = ensemble.dt();

  meanderiv::EstimatorConfig per_step = config;
  per_step.grid.windows.clear();
  for (std::size_t k = k_begin; k < k_end; ++k) per_step.grid.windows.push_back({k, k + 1});
  const auto forward = meanderiv::estimate_forward(ensemble, per_step);
  const std::size_t cells = per_step.grid.spatial_bins();

  StochasticEnergy out;
  double value = 0.0, variance = 0.0;
  for (std::size_t w = 0; w < per_step.grid.windows.size(); ++w) {
    std::size_t used = 0;
    for (std::size_t c = 0; c < cells; ++c)
      if (forward.populated(w * cells + c)) used += forward.count[w * cells + c];
    out.dropped_samples += ensemble.paths() - used;
    if (used == 0) throw EstimationError("no populated bin at step " + std::to_string(per_step.grid.windows[w].begin));
    for (std::size_t c = 0; c < cells; ++c) {
      const std::size_t b = w * cells + c;
      if (!forward.populated(b)) continue;
      const double share = static_cast<double>(forward.count[b]) / static_cast<double>(used);
      const Mat g = chart.metric(forward.position[b]);
      const Vec& D = forward.mean[b];
      const Vec& se = forward.standard_error[b];
      double bias = 0.0;
      for (int j = 0; j < d; ++j) bias += g(j, j) * se[j] * se[j];
      value += dt * share * (quadratic(g, D) - bias);
      const Vec gD = g * D;
      variance += dt * dt * share * share * 4.0 * gD.cwiseProduct(se).squaredNorm();
    }
  }
  out.energy = {value, std::sqrt(variance)};

  if (drift) {
    const auto total = parallel_reduce<stats::RunningStats>(
        ensemble.paths(), [] { return stats::RunningStats{}; },
        [&](stats::RunningStats& acc, std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            double sum = 0.0;
            for (std::size_t k = k_begin; k < k_end; ++k) {
              const Vec x = ensemble.state(i, k);
              sum += quadratic(chart.metric(x), drift(ensemble.time(k), x)) * dt;
            }
            acc.add(sum);
          }
        },
        [](stats::RunningStats& a, const stats::RunningStats& b) { a.merge(b); });
    out.plug_in = {total.mean(), total.standard_error()};
  }
  return out;
}

StochasticEnergy stochastic_energy(const stochastic::PathEnsemble& ensemble, const geometry::MetricChart& chart,
                                   const meanderiv::EstimatorConfig& config, const TimeVectorField& drift) {
  return stochastic_energy(ensemble, chart, config, 0, ensemble.steps(), drift);
}

GeodesicCriterion stochastic_geodesic_criterion(const geometry::MetricChart& chart, const TimeVectorField& drift,
                                                const stochastic::PathEnsemble& ensemble,
                                                const meanderiv::EstimatorConfig& config,
                                                const std::vector<std::pair<double, Vec>>& probes) {
  const int d = chart.dimension();
  if (ensemble.dimension() != d) throw ParameterError("chart dimension does not match the ensemble");
  const bool flat = is_flat(chart);
  GeodesicCriterion out;
  for (const auto& [t, x] : probes) {
    if (x.size() != d) throw ParameterError("probe dimension does not match the chart");
    const VectorField at_t = [&](const Vec& y) { return drift(t, y); };
    const Vec w = at_t(x);
    Vec dt(d);
    for (int j = 0; j < d; ++j)
      dt[j] = geometry::derivative([&](double h) { return drift(t + h, x)[j]; }, std::max(1.0, std::abs(t)),
                                   geometry::Stencil::fine);
    Vec advect = geometry::jacobian(at_t, x, geometry::Stencil::fine) * w;
    Vec curvature = Vec::Zero(d);
    if (!flat) {
      advect += geometry::christoffel(chart, x).contract(w, w);
      curvature = chart.inverse_metric(x) * geometry::ricci(chart, x) * w;
    }
    const Vec laplace = geometry::vector_laplacian(chart, at_t, x, geometry::Stencil::fine);
    const Vec residual = dt + advect + 0.5 * (laplace + curvature);
    out.analytic_residual = std::max(out.analytic_residual, residual.norm());
  }

  out.monte_carlo = meanderiv::covariant_mean_derivative(chart, ensemble, drift, meanderiv::Direction::forward,
                                                         config);
  const auto& mc = out.monte_carlo;
  std::size_t total = 0;
  for (std::size_t b = 0; b < mc.size(); ++b)
    if (mc.populated(b)) total += mc.count[b];
  if (total == 0) throw EstimationError("no bin reached " + std::to_string(mc.min_count) + " samples");
  out.pooled = Vec::Zero(d);
  Vec var = Vec::Zero(d);
  for (std::size_t b = 0; b < mc.size(); ++b) {
    if (!mc.populated(b)) continue;
    const double share = static_cast<double>(mc.count[b]) / static_cast<double>(total);
    out.pooled += share * mc.mean[b];
    var += share * share * mc.standard_error[b].cwiseAbs2();
    for (int j = 0; j < d; ++j)
      out.max_bin_z = std::max(out.max_bin_z, z_score(mc.mean[b][j], mc.standard_error[b][j]));
  }
  out.pooled_error = var.cwiseSqrt();
  for (int j = 0; j < d; ++j) out.pooled_z = std::max(out.pooled_z, z_score(out.pooled[j], out.pooled_error[j]));
  return out;
}

}  // namespace fractoid::geodesic
