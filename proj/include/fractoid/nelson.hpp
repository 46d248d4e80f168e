#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fractoid/geometry.hpp"
#include "fractoid/meanderiv.hpp"
#include "fractoid/stochastic.hpp"
#include "fractoid/types.hpp"

namespace fractoid::nelson {

using Complex = std::complex<double>;
using ComplexField = std::function<Complex(const Vec&)>;

/// Complex values on a uniform grid, row-major with axis 0 slowest.
struct WaveFunctionGrid {
  std::vector<int> shape;
  Vec lower;    ///< first node
  Vec spacing;
  std::vector<Complex> values;
  double hbar = 1.0;
  double mass = 1.0;

  int dimension() const noexcept { return static_cast<int>(shape.size()); }
  std::size_t size() const noexcept;
  Vec node(std::size_t index) const;
  /// Product of the spacings.
  double cell_volume() const;
  /// √(Σ |ψ|² · cell volume).
  double norm() const;
  /// Shapes, finiteness, positive ħ and m, non-zero norm; ParameterError otherwise.
  void validate() const;
};

/// Samples ψ on the grid with nodes lower + i · spacing.
WaveFunctionGrid sample(const ComplexField& psi, const std::vector<int>& shape, const Vec& lower, const Vec& spacing,
                        double hbar = 1.0, double mass = 1.0);

/// "ho-ground(omega)", "plane-wave(k)" (k along every axis), "gaussian-packet(sigma)"
/// (position variance σ² per axis). Unknown names raise ConfigError.
ComplexField named_wavefunction(std::string_view name, double hbar = 1.0, double mass = 1.0);
std::vector<std::string> registered_wavefunctions();

struct PotentialField {
  ScalarField value;
  std::string name;
};

/// "zero", "constant(c)", "harmonic(omega)" = ½ m ω² |x|².
PotentialField named_potential(std::string_view name, double mass = 1.0);

/// Forward drift b₊ = v + u and noise ε = √(ħ/m).
struct NelsonProcessSpec {
  TimeVectorField current;
  TimeVectorField osmotic;
  double epsilon = 1.0;
  int dimension = 1;
  /// Grid nodes with |ψ| ≤ 1e-12; the fields are NaN there.
  std::vector<std::size_t> masked;
  std::vector<std::string> warnings;

  stochastic::ItoProcessSpec forward_process() const;
};

/// v = (ħ/m) Im(∇ψ/ψ), u = (ħ/m) Re(∇ψ/ψ) by central differences at the nodes,
/// multilinear interpolation in between.
NelsonProcessSpec drift_from_wavefunction(const WaveFunctionGrid& psi);
/// Same map for a closed-form ψ, differentiated at the evaluation point.
NelsonProcessSpec drift_from_wavefunction(const ComplexField& psi, int dimension, double hbar = 1.0,
                                          double mass = 1.0);

struct NewtonNelsonReport {
  std::vector<Vec> position;
  std::vector<Vec> acceleration;
  std::vector<Vec> target;  ///< F/m
  std::vector<std::size_t> count;
  std::vector<double> residual;  ///< ‖a − F/m‖
  std::vector<double> relative;  ///< residual / ‖F/m‖ (absolute where F = 0)
  std::vector<bool> used;        ///< valid, selected and populated
  std::size_t populated = 0;
  double median_relative = 0.0;
  double p90_relative = 0.0;
  double median_residual = 0.0;
  std::vector<std::string> warnings;
};

/// Acceleration of the ensemble (decomposition form with the chart's connection),
/// plus (ħ/2m) Ric∘w₂ when include_ricci is set, compared with F/m per bin. Bins
/// enter the pooled statistics when `select(position)` holds (all when empty).
NewtonNelsonReport newton_nelson_residual(const stochastic::PathEnsemble& ensemble, const VectorField& force,
                                          double mass, const geometry::MetricChart& chart, bool include_ricci,
                                          const meanderiv::EstimatorConfig& config, double hbar = 1.0,
                                          const std::function<bool(const Vec&)>& select = {});

struct QuadraticVariationLaw {
  meanderiv::BinEstimates estimates;
  std::vector<Mat> expected;  ///< (ħ/m) g⁻¹ averaged over each bin's samples
  double worst_diagonal = 0.0;  ///< largest relative diagonal deviation
  double worst_off_diagonal_z = 0.0;
  bool pass = false;
  std::string message;
};

/// Passes iff every populated bin has diagonals within `tolerance` (relative) of
/// the bin average of (ħ/m) g⁻¹ and off-diagonals within 3σ of it. ħ/m = 0 fails as a deterministic ensemble.
QuadraticVariationLaw quadratic_variation_law(const stochastic::PathEnsemble& ensemble,
                                              const meanderiv::EstimatorConfig& config,
                                              const geometry::MetricChart& chart, double hbar_over_m,
                                              double tolerance = 0.02);

/// (−Δφ)(x) = Σ_λ (2φ(x) − φ(x − e_λ) − φ(x + e_λ)) on the integer lattice of `shape`;
/// outside values are zero unless periodic.
std::vector<double> discrete_laplacian(const std::vector<double>& phi, const std::vector<int>& shape,
                                      bool periodic = true);

/// −(ħ²/2m) Δ_h ψ + V ψ with the second-difference Laplacian, periodic boundary.
WaveFunctionGrid grid_schrodinger_apply(const WaveFunctionGrid& psi, const PotentialField& potential);

/// e^{itΔ} ψ₀ by direct quadrature of (4πit)^{−1/2} ∫ e^{i(x−y)²/4t} ψ₀(y) dy on a
/// 1-D grid. The Fresnel width √(4π|t|) must span at least two cells.
WaveFunctionGrid free_propagator(const WaveFunctionGrid& psi0, double t);

/// L² distance √(Σ |a − b|² · cell volume) between grids of the same shape.
double l2_distance(const WaveFunctionGrid& a, const WaveFunctionGrid& b);

/// E[exp(−∫₀ᵗ V(x + W_s) ds) φ(x + W_t)] for standard Brownian W, the kernel of
/// e^{−tS} with S = −½Δ + V. The time integral is the trapezoid rule on `steps` steps.
Estimate feynman_kac_semigroup(const PotentialField& potential, const ScalarField& phi, double t, const Vec& x,
                               std::size_t n_paths, std::uint64_t seed, std::size_t steps = 200);

/// Rows `x0..,re,im` plus a manifest {hbar, mass, grid: {shape, lower, spacing}}.
void write_wavefunction(const WaveFunctionGrid& psi, const std::filesystem::path& csv,
                        const std::filesystem::path& manifest);
WaveFunctionGrid read_wavefunction(const std::filesystem::path& csv, const std::filesystem::path& manifest);

}  // namespace fractoid::nelson
