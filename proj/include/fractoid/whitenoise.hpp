#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "fractoid/types.hpp"

namespace fractoid::whitenoise {

/// Cells of [0, T] × [−L, L]^d; cell centres t = (i + ½)Δt, x = −L + (j + ½)Δx.
/// Cell index is row-major over (t, x₀, …, x_{d−1}) with time slowest.
struct SpaceTimeLattice {
  double horizon = 1.0;
  double dt = 0.1;
  double half_width = 1.0;
  double dx = 0.1;
  int spatial_dimension = 4;
  std::size_t max_cells = 10'000'000;

  std::size_t time_cells() const;
  std::size_t space_cells_per_axis() const;
  std::size_t size() const;
  /// Δt · Δx^d.
  double cell_volume() const;
  /// (t, x) at the centre of a cell, length 1 + d.
  Vec center(std::size_t cell) const;
  /// Throws ParameterError on bad steps and ResourceError past max_cells.
  void validate() const;
};

nlohmann::json to_json(const SpaceTimeLattice& lattice);
SpaceTimeLattice lattice_from_json(const nlohmann::json& j);

/// Θ per cell, iid N(0, 1/(Δt·Δx^d)).
struct WhiteNoiseSample {
  SpaceTimeLattice lattice;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> values;
};

/// Cell c holds normal number c of stream (seed, stream), scaled by 1/√(cell volume).
WhiteNoiseSample sample_white_noise(const SpaceTimeLattice& lattice, std::uint64_t seed, std::uint64_t stream = 0);

/// Test function of the space-time point (t, x) as one vector of length 1 + d.
using TestFunction = std::function<double(const Vec&)>;

/// Values of w at the cell centres.
std::vector<double> discretize(const SpaceTimeLattice& lattice, const TestFunction& w);

/// Σ_cells w Θ Δt Δx^d.
double paley_wiener_integral(const WhiteNoiseSample& sample, const std::vector<double>& w);
double paley_wiener_integral(const WhiteNoiseSample& sample, const TestFunction& w);

/// Discrete L² inner product Σ w v Δt Δx^d.
double inner_product(const SpaceTimeLattice& lattice, const std::vector<double>& w, const std::vector<double>& v);

struct CovarianceCheck {
  Estimate covariance;
  double expected = 0.0;  ///< ⟨w, v⟩ on the lattice
  double z = 0.0;
  std::size_t samples = 0;
};

/// Sample covariance of (W_w, W_v) over samples drawn from streams 0..n−1, against ⟨w, v⟩.
/// The standard error is that of the mean of centred products.
CovarianceCheck covariance_check(const SpaceTimeLattice& lattice, const std::vector<double>& w,
                                 const std::vector<double>& v, std::size_t n_samples, std::uint64_t seed);
CovarianceCheck covariance_check(const SpaceTimeLattice& lattice, const TestFunction& w, const TestFunction& v,
                                 std::size_t n_samples, std::uint64_t seed);

/// Σ_{i ≤ n−z*} v_i w_i − Σ_{i > n−z*} v_i w_i (1-based i).
double signature_inner_product(const std::vector<double>& v, const std::vector<double>& w, std::size_t z_star);

/// "bump(c, width)" = exp(−|y − c|² / (2 width²)) and "indicator(lo, hi)" of the box
/// [lo, hi]^{1+d}; a per-axis form lists 1 + d centres, or 1 + d (lo, hi) pairs.
TestFunction named_test_function(std::string_view name, int spatial_dimension);
std::vector<std::string> registered_test_functions();

/// Raw little-endian doubles in cell order, plus a manifest {lattice, seed, stream}.
void write_sample(const WhiteNoiseSample& sample, const std::filesystem::path& data,
                  const std::filesystem::path& manifest);
WhiteNoiseSample read_sample(const std::filesystem::path& data, const std::filesystem::path& manifest);

}  // namespace fractoid::whitenoise
