#pragma once

#include <string>
#include <vector>

#include "fractoid/geometry.hpp"
#include "fractoid/meanderiv.hpp"
#include "fractoid/stochastic.hpp"
#include "fractoid/types.hpp"

namespace fractoid::geodesic {

/// Points γ(t_k) on the uniform grid t_k = k dt, one row per node.
struct PathCurve {
  double dt = 0.0;
  Mat points;
  /// Integrator velocities, same shape as points; empty for sampled curves.
  Mat tangent;
  std::string chart_name;
  /// Set when integration stopped early at the chart boundary.
  std::vector<std::string> warnings;

  std::size_t steps() const noexcept { return points.rows() > 0 ? static_cast<std::size_t>(points.rows() - 1) : 0; }
  /// γ̇ by central differences inside, second-order one-sided at the ends.
  Vec velocity(std::size_t k) const;
  /// Uniform grid, at least three nodes, every node inside the chart.
  void validate(const geometry::MetricChart& chart) const;
};

/// Curve from samples of γ(t) on [0, T] with K steps.
PathCurve sample_curve(const std::function<Vec(double)>& gamma, double horizon, std::size_t steps,
                       std::string chart_name = {});

/// The curve as a one-path ensemble, and back; curves use the ensemble CSV format.
stochastic::PathEnsemble to_ensemble(const PathCurve& curve);
PathCurve from_ensemble(const stochastic::PathEnsemble& ensemble, std::size_t path = 0);

/// ℒ = ½ m g(ẋ, ẋ) − E_u(x).
struct LagrangianSpec {
  double mass = 1.0;
  ScalarField potential;  ///< empty means zero
};

/// Trapezoid rule for ∫ g_μν(γ) γ̇^μ γ̇^ν dt.
double energy_functional(const geometry::MetricChart& chart, const PathCurve& curve);

/// RK4 on ẍ^k = −Γ^k_ij ẋ^i ẋ^j. Stops at the last node inside the chart, with a warning.
PathCurve classical_geodesic(const geometry::MetricChart& chart, const Vec& x0, const Vec& v0, double horizon,
                             double dt);

/// d/dt(∂ℒ/∂ẋ) − ∂ℒ/∂x at nodes 2..K−2 (row k−2), central differences throughout.
Mat euler_lagrange_residual(const geometry::MetricChart& chart, const PathCurve& curve,
                            const LagrangianSpec& lagrangian);

/// dE/dε at 0 of energy_functional(γ + ε ϑ) by symmetric difference, ε = 1e-5.
/// ϑ (same shape as the points) must vanish at both endpoints, to 1e-12 of its size.
double first_variation(const geometry::MetricChart& chart, const PathCurve& curve, const Mat& perturbation);

struct StochasticEnergy {
  Estimate energy;
  /// E ∫ g(w, w) dt along the paths when a drift is supplied.
  Estimate plug_in;
  std::size_t dropped_samples = 0;  ///< samples in bins below min_count
};

/// E ∫ ‖D ℳ_t‖² dt from the forward mean-derivative estimator, one time window
/// per step over [k_begin, k_end) and the spatial bins of `config`. Each bin
/// contributes its sample share times g(D̂, D̂) minus the estimator variance
/// Σ g_ii se_i², which removes the bias of squaring a noisy mean.
StochasticEnergy stochastic_energy(const stochastic::PathEnsemble& ensemble, const geometry::MetricChart& chart,
                                   const meanderiv::EstimatorConfig& config, std::size_t k_begin, std::size_t k_end,
                                   const TimeVectorField& drift = {});
StochasticEnergy stochastic_energy(const stochastic::PathEnsemble& ensemble, const geometry::MetricChart& chart,
                                   const meanderiv::EstimatorConfig& config, const TimeVectorField& drift = {});

struct GeodesicCriterion {
  /// max over probes of ‖∂_t w + ∇_w w + ½(Δw + Ric∘w)‖.
  double analytic_residual = 0.0;
  /// Per-bin forward covariant mean derivative of w along the ensemble.
  meanderiv::BinEstimates monte_carlo;
  /// Count-weighted mean of the populated bins and its standard error, per component.
  Vec pooled;
  Vec pooled_error;
  double pooled_z = 0.0;    ///< max_j |pooled_j| / pooled_error_j
  double max_bin_z = 0.0;
};

/// Both sides of the stochastic-geodesic condition for drift w: the analytic
/// residual at the (t, x) probes, with ∇_w w read as self-advection and Δ the
/// connection Laplacian (componentwise on flat charts, five-point stencils), and
/// the Monte Carlo mean derivative D w(t, φ_t) on an ensemble driven by w.
GeodesicCriterion stochastic_geodesic_criterion(const geometry::MetricChart& chart, const TimeVectorField& drift,
                                                const stochastic::PathEnsemble& ensemble,
                                                const meanderiv::EstimatorConfig& config,
                                                const std::vector<std::pair<double, Vec>>& probes);

}  // namespace fractoid::geodesic
