#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fractoid/geometry.hpp"
#include "fractoid/stochastic.hpp"
#include "fractoid/types.hpp"

namespace fractoid::meanderiv {

using stochastic::PathEnsemble;

/// Step indices [begin, end) pooled into one time bin.
struct TimeWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Rectangular (t, x) bins: time windows times a uniform spatial box grid.
/// Bin b = window · spatial_bins() + cell, cells row-major with axis 0 slowest.
struct BinGrid {
  std::vector<TimeWindow> windows;
  Vec lower;
  Vec upper;
  std::vector<int> cells;

  int dimension() const noexcept { return static_cast<int>(cells.size()); }
  std::size_t spatial_bins() const noexcept;
  std::size_t size() const noexcept { return windows.size() * spatial_bins(); }
  /// Spatial cell holding x, or nothing outside the box.
  std::optional<std::size_t> cell(const double* x) const noexcept;
  std::vector<int> cell_index(std::size_t cell) const;
  /// Neighbouring cell along `axis` (offset ±1), or nothing past the box edge.
  std::optional<std::size_t> neighbour(std::size_t cell, int axis, int offset) const;
  Vec cell_center(std::size_t cell) const;
  /// Throws ParameterError on inconsistent shapes or empty windows.
  void validate() const;
};

/// Single-step windows at the steps nearest to `times`.
std::vector<TimeWindow> windows_at(const PathEnsemble& ensemble, const std::vector<double>& times);

enum class CausalSplit { off, timelike, spacelike };

struct EstimatorConfig {
  BinGrid grid;
  std::size_t min_count = 200;
  /// Δτ = lag · dt.
  std::size_t lag = 1;
  /// Keeps only increments with −Δx⁰² + Σ Δxⁱ² ≤ 0 (timelike) or > 0 (spacelike).
  /// Lorentzian charts only.
  CausalSplit causal_split = CausalSplit::off;

  void validate() const;
};

enum class Direction { forward, backward };

/// Per-bin sample means of a feature. Bins below min_count are empty: their
/// mean and standard error are NaN.
struct BinEstimates {
  BinGrid grid;
  std::size_t min_count = 0;
  int components = 0;
  std::vector<std::size_t> count;
  std::vector<Vec> mean;
  std::vector<Vec> standard_error;
  /// Mean φ_t and mean t of the samples in each bin.
  std::vector<Vec> position;
  std::vector<double> time;

  std::size_t size() const noexcept { return count.size(); }
  bool populated(std::size_t bin) const noexcept { return count[bin] >= min_count; }
  std::size_t populated_count() const noexcept;
  /// Bin mean reshaped to a square matrix (quadratic-variation estimates).
  Mat matrix(std::size_t bin) const;
  Mat matrix_error(std::size_t bin) const;
};

/// Forward mean derivative: bin mean of (φ_{t+Δτ} − φ_t)/Δτ given φ_t in the bin.
BinEstimates estimate_forward(const PathEnsemble& ensemble, const EstimatorConfig& config);
/// Backward mean derivative: bin mean of (φ_t − φ_{t−Δτ})/Δτ given φ_t in the bin.
BinEstimates estimate_backward(const PathEnsemble& ensemble, const EstimatorConfig& config);

/// Current and osmotic velocities, computed from the forward and backward
/// estimates (never estimated on their own).
struct MeanDerivativeField {
  BinEstimates forward;
  BinEstimates backward;
  std::vector<Vec> current;
  std::vector<Vec> osmotic;
  /// ½ √(se₊² + se₋²), shared by both combinations.
  std::vector<Vec> standard_error;

  std::size_t size() const noexcept { return current.size(); }
  bool populated(std::size_t bin) const noexcept { return forward.populated(bin) && backward.populated(bin); }
  const Vec& position(std::size_t bin) const { return forward.position[bin]; }
  double time(std::size_t bin) const { return forward.time[bin]; }
};

MeanDerivativeField velocity_fields(const BinEstimates& forward, const BinEstimates& backward);

struct AccelerationField {
  std::string method;
  BinGrid grid;
  std::vector<Vec> value;
  std::vector<bool> valid;
  std::vector<Vec> position;
  std::vector<double> time;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return value.size(); }
};

/// a = ∂_t w₁ + (w₁·∇)w₁ − (w₂·∇)w₂ − (ε²/2)∇²w₂, derivatives by three-point
/// differences on the bin grid with the bins' mean positions as abscissae.
/// With a single time window ∂_t w₁ is taken as 0.
AccelerationField mean_acceleration(const MeanDerivativeField& field, double epsilon);

/// D_s w₁ − D_Λ w₂ with D_s w₁ = ∂_t w₁ + ∇_{w₁} w₁ and D_Λ w₂ = ∇_{w₂} w₂ + (ε²/2) Δ w₂,
/// covariant derivatives of `chart` and Δ the Laplace–Beltrami operator per component.
AccelerationField acceleration_decomposed(const MeanDerivativeField& field, const geometry::MetricChart& chart,
                                          double epsilon);

/// Bin mean of (Γ X(t+Δτ, φ_{t+Δτ}) − X(t, φ_t))/Δτ, with Γ the Levi-Civita transport
/// back to φ_t along the recorded path (backward direction mirrored).
BinEstimates covariant_mean_derivative(const geometry::MetricChart& chart, const PathEnsemble& ensemble,
                                       const TimeVectorField& field, Direction direction,
                                       const EstimatorConfig& config);

/// ∂X/∂τ + ∇_β X ± (ε²/2) ∇²X at (t, x); β is the forward or backward drift.
Vec covariant_mean_derivative_analytic(const geometry::MetricChart& chart, const TimeVectorField& field,
                                       const TimeVectorField& drift, double epsilon, Direction direction, double t,
                                       const Vec& x);

/// Bin mean of (Δφ ⊗ Δφ)/Δτ over forward or backward increments; read entries with matrix().
BinEstimates quadratic_variation_matrix(const PathEnsemble& ensemble, const EstimatorConfig& config,
                                        Direction direction = Direction::forward);

/// Bin mean of f(t, φ_t) over the samples that have a forward increment of `lag` steps,
/// the same samples the forward estimators average.
BinEstimates bin_average(const PathEnsemble& ensemble, const EstimatorConfig& config, int components,
                         const TimeVectorField& f);

/// (ħ/2m) Ric^k_j w₂^j at each populated bin's mean position; NaN elsewhere.
std::vector<Vec> ricci_correction(const geometry::MetricChart& chart, const MeanDerivativeField& field,
                                  double hbar_over_m);

/// Fraction of lag-step increments with positive Minkowski interval (x⁰ is time).
double spacelike_fraction(const PathEnsemble& ensemble, std::size_t lag = 1);

/// φ̃_k = φ_{K−k} for every path.
PathEnsemble time_reversed(const PathEnsemble& ensemble);

/// Rows `t,x0..,count,D+_0..,D-_0..,w1_0..,w2_0..,se_0..` for populated bins.
void write_field_csv(const MeanDerivativeField& field, const std::filesystem::path& file);
nlohmann::json config_manifest(const EstimatorConfig& config);

}  // namespace fractoid::meanderiv
