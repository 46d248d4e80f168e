#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fractoid/geometry.hpp"
#include "fractoid/rng.hpp"
#include "fractoid/types.hpp"

namespace fractoid::stochastic {

/// dφ = β(t, φ) dt + ε dW, or β dt + G(t, φ) dW when a diffusion field is set.
struct ItoProcessSpec {
  TimeVectorField drift;
  double diffusion_const = 1.0;
  int dimension = 1;
  /// Optional state-dependent diffusion G (dimension × noise_dimension); replaces ε I.
  TimeMatrixField diffusion_field;
  int noise_dimension = 0;
  std::string drift_name = "custom";
};

/// dφ = b(t, φ) dt + G(t, φ) ∘ dW.
struct StratonovichSpec {
  TimeVectorField drift;
  TimeMatrixField diffusion;
  int dimension = 1;
  int noise_dimension = 1;
  std::string drift_name = "custom";
};

/// N sample paths on the uniform grid t_k = k dt, k = 0..K, stored path-major.
class PathEnsemble {
 public:
  PathEnsemble() = default;
  PathEnsemble(std::size_t paths, std::size_t steps, int dimension, double dt);

  std::size_t paths() const noexcept { return paths_; }
  /// Number of steps K; every path has K + 1 points.
  std::size_t steps() const noexcept { return steps_; }
  int dimension() const noexcept { return dimension_; }
  double dt() const noexcept { return dt_; }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt_; }
  double horizon() const noexcept { return time(steps_); }

  double* point(std::size_t path, std::size_t k) noexcept { return data_.data() + offset(path, k); }
  const double* point(std::size_t path, std::size_t k) const noexcept { return data_.data() + offset(path, k); }
  double& at(std::size_t path, std::size_t k, int j) noexcept { return point(path, k)[j]; }
  double at(std::size_t path, std::size_t k, int j) const noexcept { return point(path, k)[j]; }
  Vec state(std::size_t path, std::size_t k) const;
  /// One path as a (K+1) × dimension matrix.
  Mat path(std::size_t path) const;

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::uint64_t seed = 0;
  std::string chart_name;
  double epsilon = 0.0;
  std::string drift_name;

 private:
  std::size_t offset(std::size_t path, std::size_t k) const noexcept {
    return (path * (steps_ + 1) + k) * static_cast<std::size_t>(dimension_);
  }
  std::size_t paths_ = 0;
  std::size_t steps_ = 0;
  int dimension_ = 0;
  double dt_ = 0.0;
  std::vector<double> data_;
};

/// Draws an initial condition for one path from its own stream.
using InitialSampler = std::function<Vec(std::size_t path, const NormalStream& stream)>;

struct SimulationOptions {
  /// When set, replaces the fixed starting point.
  InitialSampler initial;
  /// Keep every n-th step; the ensemble's dt becomes n · dt.
  std::size_t record_every = 1;
};

/// Number of steps for horizon T at step dt; T must be a multiple of dt to 1e-9 relative.
std::size_t step_count(double horizon, double dt);

/// Gaussian increments with variance dt: element k · dimension + j is normal number
/// k · dimension + j of stream (seed, stream), scaled by √dt.
std::vector<double> wiener_increments(std::size_t n_steps, double dt, int dimension, std::uint64_t seed,
                                      std::uint64_t stream);

/// Euler–Maruyama. Path i uses stream i, so its noise equals wiener_increments(K, dt, dim, seed, i).
PathEnsemble simulate_ito(const ItoProcessSpec& spec, const Vec& x0, double horizon, double dt, std::size_t n_paths,
                          std::uint64_t seed, const SimulationOptions& options = {});

/// Heun predictor–corrector for the Stratonovich equation.
PathEnsemble simulate_stratonovich(const StratonovichSpec& spec, const Vec& x0, double horizon, double dt,
                                   std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options = {});

/// dv = ε √(g⁻¹) dW + (w − (ε²/2) g^{ρς} Γ_{ρς}) dt. A step leaving the chart's
/// valid region is redrawn from fresh normals, at most 100 times.
PathEnsemble simulate_manifold_diffusion(const geometry::MetricChart& chart, const TimeVectorField& drift,
                                         const Vec& x0, double horizon, double dt, std::size_t n_paths,
                                         std::uint64_t seed, double epsilon, const SimulationOptions& options = {});

/// Levi-Civita transport dv^k = −Γ^k_ij v^i dx^j along the rows of `path`,
/// implicit midpoint per step. Returns v at every point of the path.
std::vector<Vec> parallel_transport(const geometry::MetricChart& chart, const Mat& path, const Vec& v0);

/// Signed rotation angle in [0, 2π) taking a to b in the orthonormal frame of
/// a diagonal 2-D metric g at x.
double rotation_angle(const geometry::MetricChart& chart, const Vec& x, const Vec& a, const Vec& b);

struct FrameState {
  Vec base_point;
  Mat frame;  ///< columns are tangent vectors
};

/// ‖Eᵀ g E − η‖_∞.
double orthonormality_defect(const geometry::MetricChart& chart, const FrameState& state);

/// Gram–Schmidt of the frame columns against g.
void orthonormalize(const geometry::MetricChart& chart, FrameState& state);

struct FrameEnsemble {
  PathEnsemble base;
  /// frames[(path · (K+1) + k) · d² ...], column-major d × d.
  std::vector<double> frames;
  /// Largest defect seen at any output time (after renormalization).
  double max_defect = 0.0;

  Mat frame(std::size_t path, std::size_t k) const;
};

/// Horizontal lift on the orthonormal frame bundle: dx = E ∘ dW, E parallel
/// transported along x. Heun for the base point, implicit midpoint for the frame;
/// Gram–Schmidt every 100 steps and before output.
FrameEnsemble frame_bundle_simulate(const geometry::MetricChart& chart, const FrameState& initial, double horizon,
                                    double dt, std::size_t n_paths, std::uint64_t seed,
                                    const SimulationOptions& options = {});

/// ½ Δ_g z + w · ∇z at x.
double generator_apply(const geometry::MetricChart& chart, const VectorField& drift, const ScalarField& z,
                       const Vec& x);

struct SemimartingaleDecomposition {
  Mat bounded_variation_part;
  Mat martingale_part;
  double residual = 0.0;
};

/// Windowed local-mean drift. The bounded-variation part starts at the initial
/// point and accumulates centred `window`-step means of the increments.
SemimartingaleDecomposition decompose_semimartingale(const Mat& path, std::size_t window);

struct FractalScalingReport {
  std::vector<double> scales;
  std::vector<double> lengths;
  double fitted_dimension = 0.0;
  double dimension_stderr = 0.0;
  double fitted_slope = 0.0;
  double fluctuation_plus = 0.0;
  double fluctuation_minus = 0.0;
  double diffusion_coefficient = 0.0;
  double diffusion_stderr = 0.0;
  double reference_time = 1.0;
};

/// ℓ(δt) = mean path length at resolution δt; log ℓ = c + s log δt gives
/// D_f = 1 / (1 + s) (increments ∝ δt^{1/D_f}). D_m = Var(x_T − x_0) / (2T)
/// averaged over components.
FractalScalingReport fractal_scaling(const PathEnsemble& ensemble, const std::vector<std::size_t>& scales,
                                     double reference_time = 1.0);

/// Rows `path_id,step,t,x0..` with 17 significant digits.
void write_csv(const PathEnsemble& ensemble, const std::filesystem::path& file);
PathEnsemble read_csv(const std::filesystem::path& file);

nlohmann::json manifest(const PathEnsemble& ensemble);
void write_manifest(const PathEnsemble& ensemble, const std::filesystem::path& file);

/// Little-endian header plus raw doubles; round-trips bit-exactly.
void write_binary(const PathEnsemble& ensemble, const std::filesystem::path& file);
PathEnsemble read_binary(const std::filesystem::path& file);

}  // namespace fractoid::stochastic
