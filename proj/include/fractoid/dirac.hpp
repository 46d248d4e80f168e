#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "fractoid/types.hpp"

namespace fractoid::dirac {

using Complex = std::complex<double>;
using Matrix4 = Eigen::Matrix4cd;
using Spinor = Eigen::Vector4cd;
using Vector4 = Eigen::Vector4d;

/// γ⁰..γ³ and γ⁵ with {γ^μ, γ^ν} = 2η^{μν} I, η = diag(+1, −1, −1, −1).
struct GammaSet {
  std::array<Matrix4, 4> gamma;
  Matrix4 gamma5;
  std::string convention;

  /// η^{μν} of the gamma algebra.
  static Vector4 metric() { return Vector4(1.0, -1.0, -1.0, -1.0); }
  /// c(ω) = ω_μ γ^μ.
  Matrix4 slash(const Vector4& omega) const;
};

/// "dirac-basis": γ⁰ = diag(I, −I), γ^k = [[0, σ_k], [−σ_k, 0]], γ⁵ = [[0, I], [I, 0]].
/// Checks the anticommutators and γ⁵ = iγ⁰γ¹γ²γ³ before returning (ConventionError
/// on failure); unknown conventions raise ConfigError.
GammaSet build_gammas(std::string_view convention = "dirac-basis");

/// Largest entry of {γ^μ, γ^ν} − 2η^{μν} I over all sixteen pairs.
double anticommutator_defect(const GammaSet& gammas);
/// max of ‖(γ⁵)² − I‖ and ‖{γ⁵, γ^μ}‖ over μ.
double chirality_defect(const GammaSet& gammas);

/// |−(p⁰)² + |p⃗|² + m²| for the contravariant 4-momentum p.
double klein_gordon_residual(const Vector4& p, double m);

struct PlaneWaveSpinor {
  Vector4 p;      ///< contravariant (p⁰, p⃗), on shell
  Spinor u;       ///< unit norm
  double mass = 0.0;
  Eigen::Matrix<Complex, 4, Eigen::Dynamic> null_space;  ///< orthonormal columns
};

/// γ^μ p_μ with p_μ = η_{μν} p^ν.
Matrix4 momentum_slash(const Vector4& p, const GammaSet& gammas);

/// p⁰ = √(|p⃗|² + m²) and the null space of γ^μ p_μ − m by SVD, singular values
/// below 1e-10 of the largest counted as zero. An empty null space raises ConventionError.
PlaneWaveSpinor dirac_plane_wave(const Eigen::Vector3d& momentum, double m, const GammaSet& gammas);

/// ‖(γ^μ p_μ − m) u‖ / ‖u‖.
double dirac_residual(const Vector4& p, double m, const Spinor& u, const GammaSet& gammas);

/// Spinor field on a periodic grid over (x⁰, x¹, x², x³), row-major with x⁰ slowest.
/// Axes of length 1 are constant directions.
struct SpinorGrid {
  std::array<int, 4> shape{1, 1, 1, 1};
  Vector4 lower = Vector4::Zero();
  Vector4 spacing = Vector4::Ones();
  std::vector<Spinor> values;

  std::size_t size() const noexcept;
  Vector4 node(std::size_t index) const;
  /// Index of the node offset by `step` along `axis`, wrapping periodically.
  std::size_t shifted(std::size_t index, int axis, int step) const;
  void validate() const;
};

SpinorGrid sample_spinor(const std::function<Spinor(const Vector4&)>& psi, const std::array<int, 4>& shape,
                         const Vector4& lower, const Vector4& spacing);

/// Σ_μ γ^μ ∂_μ ψ with central differences along every axis longer than one node.
SpinorGrid dirac_operator_fd(const SpinorGrid& psi, const GammaSet& gammas);

/// ‖c(ω₁)c(ω₂) + c(ω₂)c(ω₁) + 2(ω₁, ω₂) I‖ with (ω₁, ω₂) = g^{μν} ω₁_μ ω₂_ν.
/// The default pairing is the Lorentzian chart's g^{-1} = diag(−1, 1, 1, 1).
double clifford_relation_check(const Vector4& omega1, const Vector4& omega2, const GammaSet& gammas,
                               const Vector4& inverse_metric = Vector4(-1.0, 1.0, 1.0, 1.0));

/// The global sign s with {c(ω₁), c(ω₂)} = −2s(ω₁, ω₂) I on the basis forms under the
/// Lorentzian chart pairing. ConventionError unless exactly one sign works.
int clifford_sign(const GammaSet& gammas);

using OneFormField = std::function<Vector4(const Vector4&)>;
using SpinorField = std::function<Spinor(const Vector4&)>;

/// ‖[∇_X, c(ω)] ψ − c(∇_X ω) ψ‖ at x on the flat chart, every directional derivative
/// by a central difference with step 1e-5 max(1, ‖x‖∞). ψ defaults to (1, 1, 1, 1)/2.
double clifford_connection_check(const OneFormField& omega, const Vector4& direction, const Vector4& x,
                                 const GammaSet& gammas, const SpinorField& probe = {});

/// {convention, metric, gamma: [γ⁰..γ³], gamma5}, matrices as rows of [re, im] pairs.
nlohmann::json gammas_to_json(const GammaSet& gammas);
GammaSet gammas_from_json(const nlohmann::json& j);

}  // namespace fractoid::dirac
