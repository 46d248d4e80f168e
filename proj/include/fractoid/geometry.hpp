#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "fractoid/types.hpp"

namespace fractoid::geometry {

/// Metric signature as counts of positive and negative eigenvalues.
/// Lorentzian charts use (-,+,+,+) with the time coordinate first.
struct Signature {
  int positive = 0;
  int negative = 0;
  bool operator==(const Signature&) const = default;
};

using MetricFn = std::function<Mat(const Vec&)>;
/// Analytic metric partials: result[l](i, j) = d g_ij / d x^l.
using MetricDerivativeFn = std::function<std::vector<Mat>(const Vec&)>;
using RegionFn = std::function<bool(const Vec&)>;

/// How metric partial derivatives are obtained.
enum class Derivatives {
  automatic,          ///< analytic partials when the chart has them
  finite_difference,  ///< always central differences
};

/// A coordinate chart carrying a signature-aware metric field.
/// Immutable after construction; safe to share across threads.
class MetricChart {
 public:
  MetricChart(std::string name, int dimension, Signature signature, MetricFn metric,
              RegionFn valid_region = {}, MetricDerivativeFn metric_derivative = {});

  const std::string& name() const noexcept { return name_; }
  int dimension() const noexcept { return dimension_; }
  Signature signature() const noexcept { return signature_; }
  bool has_analytic_derivative() const noexcept { return static_cast<bool>(metric_derivative_); }

  bool contains(const Vec& x) const;

  /// g_ij(x). Throws DomainError outside the valid region.
  Mat metric(const Vec& x) const;
  /// g^ij(x). Throws SingularMetricError when |det g| <= 1e-10.
  Mat inverse_metric(const Vec& x) const;
  /// d g_ij / d x^l, analytic or by central differences (h = 1e-5 max(1,|x_l|)).
  std::vector<Mat> metric_derivative(const Vec& x, Derivatives mode = Derivatives::automatic) const;

  /// diag(-1 x negative, +1 x positive), the target of Eᵀ g E for an orthonormal frame E.
  Mat signature_matrix() const;

  /// Checks symmetry (1e-12), non-degeneracy and the eigenvalue sign count at x.
  /// Throws SingularMetricError or ConventionError.
  void check_invariants(const Vec& x) const;

 private:
  void require_domain(const Vec& x) const;

  std::string name_;
  int dimension_;
  Signature signature_;
  MetricFn metric_;
  RegionFn valid_region_;
  MetricDerivativeFn metric_derivative_;
};

/// Levi-Civita or arbitrary connection coefficients Γ^k_ij at one point.
/// Convention: ∇_{∂_i} ∂_j = Γ^k_ij ∂_k.
class ConnectionCoefficients {
 public:
  explicit ConnectionCoefficients(int dimension, bool levi_civita = false);

  int dimension() const noexcept { return dimension_; }
  bool levi_civita() const noexcept { return levi_civita_; }

  double& operator()(int k, int i, int j) { return data_[index(k, i, j)]; }
  double operator()(int k, int i, int j) const { return data_[index(k, i, j)]; }

  /// Γ^k_ij u^i v^j.
  Vec contract(const Vec& u, const Vec& v) const;
  /// Matrix A^k_i = Γ^k_ij dx^j, so that parallel transport reads dv = -A v.
  Mat along(const Vec& dx) const;

 private:
  std::size_t index(int k, int i, int j) const {
    return (static_cast<std::size_t>(k) * dimension_ + i) * dimension_ + j;
  }
  int dimension_;
  bool levi_civita_;
  std::vector<double> data_;
};

using ConnectionField = std::function<ConnectionCoefficients(const Vec&)>;

struct TorsionValue {
  Vec components;
};

/// Finite-difference step for first derivatives: 1e-5 max(1, |x_i|).
double first_step(double coordinate);
/// Finite-difference step for second derivatives: 1e-4 max(1, |x_i|).
double second_step(double coordinate);

/// Difference scheme for derivatives of user fields.
enum class Stencil {
  /// Three-point central differences with first_step / second_step.
  standard,
  /// Five-point fourth-order differences with steps 1e-3 and 1e-2 times
  /// max(1, |x_i|); lower roundoff for fields that are nearly polynomial.
  fine,
};

/// d/dh of f at h = 0 for a scalar function of one real variable.
double derivative(const std::function<double(double)>& f, double scale, Stencil stencil = Stencil::standard);

ConnectionCoefficients christoffel(const MetricChart& chart, const Vec& x,
                                   Derivatives mode = Derivatives::automatic);

/// The Levi-Civita connection of `chart` as a field.
ConnectionField levi_civita(const MetricChart& chart, Derivatives mode = Derivatives::automatic);

/// Ric_ij from the Riemann contraction; Γ derivatives by a five-point stencil.
Mat ricci(const MetricChart& chart, const Vec& x, Derivatives mode = Derivatives::automatic);

/// g^{μν}(∂_μ∂_ν f − Γ^ξ_{μν} ∂_ξ f).
double laplace_beltrami(const MetricChart& chart, const ScalarField& f, const Vec& x,
                        Stencil stencil = Stencil::standard);

/// Contraction g^{ρς} Γ^k_{ρς}; the Itô drift correction of manifold diffusions.
Vec contracted_christoffel(const MetricChart& chart, const Vec& x);

/// Symmetric square root of g^{-1} (eigendecomposition). Riemannian charts only.
Mat inverse_metric_sqrt(const MetricChart& chart, const Vec& x);

/// Gradient of a scalar by central differences.
Vec gradient(const ScalarField& f, const Vec& x, Stencil stencil = Stencil::standard);

/// Hessian of a scalar by central differences.
Mat hessian(const ScalarField& f, const Vec& x, Stencil stencil = Stencil::standard);

/// Jacobian J(k, i) = ∂_i Y^k by central differences.
Mat jacobian(const VectorField& y, const Vec& x, Stencil stencil = Stencil::standard);

/// (∇_X Y)^k = X^i ∂_i Y^k + Γ^k_ij X^i Y^j at x.
Vec covariant_derivative(const ConnectionField& connection, const Vec& direction, const VectorField& y,
                         const Vec& x);

/// Covariant Jacobian (∇_i Y)^k of a vector field under the Levi-Civita connection.
Mat covariant_jacobian(const MetricChart& chart, const VectorField& y, const Vec& x);

/// Connection (rough) Laplacian g^{ij} (∇_i ∇_j Y)^k; componentwise Laplacian on flat charts.
Vec vector_laplacian(const MetricChart& chart, const VectorField& y, const Vec& x,
                     Stencil stencil = Stencil::standard);

/// ∇_X Y − ∇_Y X − [X, Y], commutator by central differences.
TorsionValue torsion(const ConnectionField& connection, const VectorField& x_field, const VectorField& y_field,
                     const Vec& x);

/// ‖∇_X(fY) − X(f) Y − f ∇_X Y‖ at x.
double leibniz_residual(const ConnectionField& connection, const ScalarField& f, const VectorField& x_field,
                        const VectorField& y_field, const Vec& x);

/// Chart registry: "euclidean:n", "polar2", "sphere2", "hyperbolic2", "minkowski:1+3".
/// Unknown names raise ConfigError naming the key.
MetricChart make_chart(std::string_view name);
std::vector<std::string> registered_chart_names();

/// Diagonal metric from {name, dimension, signature: [p, q], diagonal_entries: [expr...]}.
MetricChart chart_from_json(const nlohmann::json& description);

}  // namespace fractoid::geometry
