#include "fractoid/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <charconv>
#include <cmath>
#include <sstream>

#include "fractoid/error.hpp"
#include "fractoid/expression.hpp"

namespace fractoid::geometry {

namespace {

constexpr double kDegenerate = 1e-10;
constexpr double kSymmetry = 1e-12;

std::string describe(const Vec& x) {
  std::ostringstream out;
  out.precision(6);
  out << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? ", " : "") << x[i];
  out << ')';
  return out.str();
}

double step_of(double coordinate, double base) { return base * std::max(1.0, std::abs(coordinate)); }

double first_base(Stencil s) { return s == Stencil::fine ? 1e-3 : 1e-5; }
double second_base(Stencil s) { return s == Stencil::fine ? 1e-2 : 1e-4; }

// Explicit return type: Eigen expressions over temporaries must be evaluated here.
template <class F>
auto first_difference(F&& f, double h, Stencil s) -> std::decay_t<decltype(f(0.0))> {
  if (s == Stencil::fine) return ((f(-2.0 * h) - f(2.0 * h)) + 8.0 * (f(h) - f(-h))) / (12.0 * h);
  return (f(h) - f(-h)) / (2.0 * h);
}

template <class F>
auto second_difference(F&& f, double h, Stencil s) -> std::decay_t<decltype(f(0.0))> {
  if (s == Stencil::fine)
    return (16.0 * (f(h) + f(-h)) - (f(2.0 * h) + f(-2.0 * h)) - 30.0 * f(0.0)) / (12.0 * h * h);
  return (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
}

Vec shifted(const Vec& x, int i, double h) {
  Vec y = x;
  y[i] += h;
  return y;
}

ConnectionCoefficients christoffel_from(const Mat& g_inv, const std::vector<Mat>& dg) {
  const int n = static_cast<int>(g_inv.rows());
  ConnectionCoefficients gamma(n, true);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double sum = 0.0;
        for (int l = 0; l < n; ++l) sum += g_inv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gamma(k, i, j) = 0.5 * sum;
        gamma(k, j, i) = 0.5 * sum;
      }
  return gamma;
}

std::vector<Mat> diagonal_derivative(int dimension, int coordinate, int entry, double value) {
  std::vector<Mat> dg(dimension, Mat::Zero(dimension, dimension));
  dg[coordinate](entry, entry) = value;
  return dg;
}

bool finite(const Vec& x) { return x.allFinite(); }

}  // namespace

double first_step(double coordinate) { return step_of(coordinate, 1e-5); }
double second_step(double coordinate) { return step_of(coordinate, 1e-4); }

double derivative(const std::function<double(double)>& f, double scale, Stencil stencil) {
  return first_difference(f, step_of(scale, first_base(stencil)), stencil);
}

MetricChart::MetricChart(std::string name, int dimension, Signature signature, MetricFn metric,
                         RegionFn valid_region, MetricDerivativeFn metric_derivative)
    : name_(std::move(name)),
      dimension_(dimension),
      signature_(signature),
      metric_(std::move(metric)),
      valid_region_(std::move(valid_region)),
      metric_derivative_(std::move(metric_derivative)) {
  if (dimension_ <= 0) throw ParameterError("chart '" + name_ + "': dimension must be positive");
  if (signature_.positive < 0 || signature_.negative < 0 ||
      signature_.positive + signature_.negative != dimension_)
    throw ParameterError("chart '" + name_ + "': signature does not add up to the dimension");
  if (!metric_) throw ParameterError("chart '" + name_ + "': missing metric function");
}

bool MetricChart::contains(const Vec& x) const {
  if (x.size() != dimension_ || !finite(x)) return false;
  return !valid_region_ || valid_region_(x);
}

void MetricChart::require_domain(const Vec& x) const {
  if (x.size() != dimension_)
    throw ParameterError("chart '" + name_ + "': point has " + std::to_string(x.size()) +
                         " coordinates, expected " + std::to_string(dimension_));
  if (!contains(x)) throw DomainError("chart '" + name_ + "': point " + describe(x) + " outside the valid region");
}

Mat MetricChart::metric(const Vec& x) const {
  require_domain(x);
  return metric_(x);
}

Mat MetricChart::inverse_metric(const Vec& x) const {
  const Mat g = metric(x);
  const double det = g.determinant();
  if (!(std::abs(det) > kDegenerate))
    throw SingularMetricError("chart '" + name_ + "': degenerate metric at " + describe(x));
  return g.inverse();
}

std::vector<Mat> MetricChart::metric_derivative(const Vec& x, Derivatives mode) const {
  require_domain(x);
  if (mode == Derivatives::automatic && metric_derivative_) return metric_derivative_(x);
  std::vector<Mat> dg(dimension_);
  for (int l = 0; l < dimension_; ++l) {
    const double h = first_step(x[l]);
    dg[l] = (metric_(shifted(x, l, h)) - metric_(shifted(x, l, -h))) / (2.0 * h);
  }
  return dg;
}

Mat MetricChart::signature_matrix() const {
  Vec diag(dimension_);
  for (int i = 0; i < dimension_; ++i) diag[i] = i < signature_.negative ? -1.0 : 1.0;
  return diag.asDiagonal();
}

void MetricChart::check_invariants(const Vec& x) const {
  const Mat g = metric(x);
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > kSymmetry)
    throw ConventionError("chart '" + name_ + "': metric not symmetric at " + describe(x));
  if (!(std::abs(g.determinant()) > kDegenerate))
    throw SingularMetricError("chart '" + name_ + "': degenerate metric at " + describe(x));
  const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  const Vec& values = eig.eigenvalues();
  const int negative = static_cast<int>((values.array() < 0.0).count());
  if (negative != signature_.negative || dimension_ - negative != signature_.positive)
    throw ConventionError("chart '" + name_ + "': eigenvalue signs (" + std::to_string(dimension_ - negative) +
                          "," + std::to_string(negative) + ") do not match the declared signature at " +
                          describe(x));
}

ConnectionCoefficients::ConnectionCoefficients(int dimension, bool levi_civita)
    : dimension_(dimension),
      levi_civita_(levi_civita),
      data_(static_cast<std::size_t>(dimension) * dimension * dimension, 0.0) {}

Vec ConnectionCoefficients::contract(const Vec& u, const Vec& v) const {
  Vec out = Vec::Zero(dimension_);
  for (int k = 0; k < dimension_; ++k)
    for (int i = 0; i < dimension_; ++i)
      for (int j = 0; j < dimension_; ++j) out[k] += (*this)(k, i, j) * u[i] * v[j];
  return out;
}

Mat ConnectionCoefficients::along(const Vec& dx) const {
  Mat a = Mat::Zero(dimension_, dimension_);
  for (int k = 0; k < dimension_; ++k)
    for (int i = 0; i < dimension_; ++i)
      for (int j = 0; j < dimension_; ++j) a(k, i) += (*this)(k, i, j) * dx[j];
  return a;
}

ConnectionCoefficients christoffel(const MetricChart& chart, const Vec& x, Derivatives mode) {
  const Mat g_inv = chart.inverse_metric(x);
  return christoffel_from(g_inv, chart.metric_derivative(x, mode));
}

ConnectionField levi_civita(const MetricChart& chart, Derivatives mode) {
  return [chart, mode](const Vec& x) { return christoffel(chart, x, mode); };
}

Mat ricci(const MetricChart& chart, const Vec& x, Derivatives mode) {
  const int n = chart.dimension();
  const ConnectionCoefficients gamma = christoffel(chart, x, mode);
  // dgamma[r](k, i, j) = ∂_r Γ^k_ij, five-point stencil.
  std::vector<ConnectionCoefficients> dgamma;
  dgamma.reserve(n);
  for (int r = 0; r < n; ++r) {
    const double h = second_step(x[r]);
    auto at = [&](double offset) { return christoffel(chart, shifted(x, r, offset), mode); };
    const auto p1 = at(h), m1 = at(-h), p2 = at(2.0 * h), m2 = at(-2.0 * h);
    ConnectionCoefficients d(n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          d(k, i, j) = ((m2(k, i, j) - p2(k, i, j)) + 8.0 * (p1(k, i, j) - m1(k, i, j))) / (12.0 * h);
    dgamma.push_back(std::move(d));
  }
  Mat ric = Mat::Zero(n, n);
  for (int s = 0; s < n; ++s)
    for (int v = 0; v < n; ++v) {
      double sum = 0.0;
      for (int r = 0; r < n; ++r) {
        sum += dgamma[r](r, v, s) - dgamma[v](r, r, s);
        for (int l = 0; l < n; ++l) sum += gamma(r, r, l) * gamma(l, v, s) - gamma(r, v, l) * gamma(l, r, s);
      }
      ric(s, v) = sum;
    }
  return ric;
}

Vec gradient(const ScalarField& f, const Vec& x, Stencil stencil) {
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto along = [&](double h) { return f(shifted(x, static_cast<int>(i), h)); };
    out[i] = first_difference(along, step_of(x[i], first_base(stencil)), stencil);
  }
  return out;
}

Mat hessian(const ScalarField& f, const Vec& x, Stencil stencil) {
  const auto n = x.size();
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ii = static_cast<int>(i);
    const double hi = step_of(x[i], second_base(stencil));
    out(i, i) = second_difference([&](double h) { return f(shifted(x, ii, h)); }, hi, stencil);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const int jj = static_cast<int>(j);
      const double hj = step_of(x[j], second_base(stencil));
      auto inner = [&](double a) {
        const Vec base = shifted(x, ii, a);
        return first_difference([&](double b) { return f(shifted(base, jj, b)); }, hj, stencil);
      };
      out(i, j) = out(j, i) = first_difference(inner, hi, stencil);
    }
  }
  return out;
}

Mat jacobian(const VectorField& y, const Vec& x, Stencil stencil) {
  const Vec y0 = y(x);
  Mat out(y0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto along = [&](double h) -> Vec { return y(shifted(x, static_cast<int>(i), h)); };
    out.col(i) = first_difference(along, step_of(x[i], first_base(stencil)), stencil);
  }
  return out;
}

double laplace_beltrami(const MetricChart& chart, const ScalarField& f, const Vec& x, Stencil stencil) {
  const Mat g_inv = chart.inverse_metric(x);
  const ConnectionCoefficients gamma = christoffel(chart, x);
  const Vec grad = gradient(f, x, stencil);
  const Mat hess = hessian(f, x, stencil);
  const int n = chart.dimension();
  double sum = 0.0;
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      double term = hess(mu, nu);
      for (int xi = 0; xi < n; ++xi) term -= gamma(xi, mu, nu) * grad[xi];
      sum += g_inv(mu, nu) * term;
    }
  return sum;
}

Vec contracted_christoffel(const MetricChart& chart, const Vec& x) {
  const Mat g_inv = chart.inverse_metric(x);
  const ConnectionCoefficients gamma = christoffel(chart, x);
  const int n = chart.dimension();
  Vec out = Vec::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) out[k] += g_inv(r, s) * gamma(k, r, s);
  return out;
}

Mat inverse_metric_sqrt(const MetricChart& chart, const Vec& x) {
  const Mat g_inv = chart.inverse_metric(x);
  const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (g_inv + g_inv.transpose()));
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw ConventionError("chart '" + chart.name() + "': inverse metric is not positive definite at " +
                          describe(x) + "; the diffusion frame needs a Riemannian chart");
  return eig.operatorSqrt();
}

Vec covariant_derivative(const ConnectionField& connection, const Vec& direction, const VectorField& y,
                         const Vec& x) {
  return jacobian(y, x) * direction + connection(x).contract(direction, y(x));
}

Mat covariant_jacobian(const MetricChart& chart, const VectorField& y, const Vec& x) {
  const ConnectionCoefficients gamma = christoffel(chart, x);
  const Vec y0 = y(x);
  Mat out = jacobian(y, x);
  const int n = chart.dimension();
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(k, i) += gamma(k, i, j) * y0[j];
  return out;
}

Vec vector_laplacian(const MetricChart& chart, const VectorField& y, const Vec& x, Stencil stencil) {
  const int n = chart.dimension();
  const Mat g_inv = chart.inverse_metric(x);
  Vec out = Vec::Zero(n);
  // Flat coordinates: the rough Laplacian is the componentwise one.
  const bool flat = chart.name().rfind("euclidean:", 0) == 0 || chart.name() == "minkowski:1+3";
  if (flat) {
    for (int k = 0; k < n; ++k) {
      const ScalarField component = [&y, k](const Vec& p) { return y(p)[k]; };
      out[k] = (g_inv.cwiseProduct(hessian(component, x, stencil))).sum();
    }
    return out;
  }
  const ConnectionCoefficients gamma = christoffel(chart, x);
  const Mat cov = covariant_jacobian(chart, y, x);
  for (int i = 0; i < n; ++i) {
    const double h = step_of(x[i], second_base(stencil));
    auto cov_along = [&](double offset) -> Mat { return covariant_jacobian(chart, y, shifted(x, i, offset)); };
    const Mat d_cov = first_difference(cov_along, h, stencil);  // ∂_i (∇_j Y)^k as (k, j)
    for (int j = 0; j < n; ++j) {
      if (g_inv(i, j) == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        double term = d_cov(k, j);
        for (int l = 0; l < n; ++l) term += gamma(k, i, l) * cov(l, j) - gamma(l, i, j) * cov(k, l);
        out[k] += g_inv(i, j) * term;
      }
    }
  }
  return out;
}

TorsionValue torsion(const ConnectionField& connection, const VectorField& x_field, const VectorField& y_field,
                     const Vec& x) {
  const ConnectionCoefficients gamma = connection(x);
  const Vec xv = x_field(x);
  const Vec yv = y_field(x);
  const Vec x_dy = jacobian(y_field, x) * xv;
  const Vec y_dx = jacobian(x_field, x) * yv;
  const Vec nabla_x_y = x_dy + gamma.contract(xv, yv);
  const Vec nabla_y_x = y_dx + gamma.contract(yv, xv);
  return {(nabla_x_y - nabla_y_x) - (x_dy - y_dx)};
}

double leibniz_residual(const ConnectionField& connection, const ScalarField& f, const VectorField& x_field,
                        const VectorField& y_field, const Vec& x) {
  const VectorField fy = [&](const Vec& p) -> Vec { return f(p) * y_field(p); };
  const Vec xv = x_field(x);
  const Vec lhs = covariant_derivative(connection, xv, fy, x);
  const double xf = gradient(f, x).dot(xv);
  const Vec rhs = xf * y_field(x) + f(x) * covariant_derivative(connection, xv, y_field, x);
  return (lhs - rhs).norm();
}

MetricChart make_chart(std::string_view name) {
  if (name.rfind("euclidean:", 0) == 0) {
    const std::string_view digits = name.substr(10);
    int n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || n < 1 || n > 64)
      throw ConfigError("chart: bad dimension in '" + std::string(name) + "'");
    return MetricChart(
        std::string(name), n, {n, 0}, [n](const Vec&) -> Mat { return Mat::Identity(n, n); }, {},
        [n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, n)); });
  }
  if (name == "polar2") {
    return MetricChart(
        "polar2", 2, {2, 0},
        [](const Vec& x) -> Mat { return Eigen::Vector2d(1.0, x[0] * x[0]).asDiagonal(); },
        [](const Vec& x) { return x[0] >= 1e-3; },
        [](const Vec& x) { return diagonal_derivative(2, 0, 1, 2.0 * x[0]); });
  }
  if (name == "sphere2") {
    return MetricChart(
        "sphere2", 2, {2, 0},
        [](const Vec& x) -> Mat {
          const double s = std::sin(x[0]);
          return Eigen::Vector2d(1.0, s * s).asDiagonal();
        },
        [](const Vec& x) { return x[0] >= 0.05 && x[0] <= M_PI - 0.05; },
        [](const Vec& x) { return diagonal_derivative(2, 0, 1, std::sin(2.0 * x[0])); });
  }
  if (name == "hyperbolic2") {
    return MetricChart(
        "hyperbolic2", 2, {2, 0},
        [](const Vec& x) -> Mat {
          const double s = std::sinh(x[0]);
          return Eigen::Vector2d(1.0, s * s).asDiagonal();
        },
        [](const Vec& x) { return x[0] > 1e-3; },
        [](const Vec& x) { return diagonal_derivative(2, 0, 1, std::sinh(2.0 * x[0])); });
  }
  if (name == "minkowski:1+3") {
    return MetricChart(
        "minkowski:1+3", 4, {3, 1},
        [](const Vec&) -> Mat { return Eigen::Vector4d(-1.0, 1.0, 1.0, 1.0).asDiagonal(); }, {},
        [](const Vec&) { return std::vector<Mat>(4, Mat::Zero(4, 4)); });
  }
  std::string known;
  for (const auto& n : registered_chart_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("chart: unknown name '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> registered_chart_names() {
  return {"euclidean:n", "polar2", "sphere2", "hyperbolic2", "minkowski:1+3"};
}

MetricChart chart_from_json(const nlohmann::json& d) {
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!d.contains(key)) throw ConfigError(std::string("chart description: missing key '") + key + "'");
    return d.at(key);
  };
  try {
    const std::string name = require("name").get<std::string>();
    const int n = require("dimension").get<int>();
    const auto& sig = require("signature");
    Signature signature;
    if (sig.is_array() && sig.size() == 2) {
      signature = {sig[0].get<int>(), sig[1].get<int>()};
    } else if (sig.is_object()) {
      signature = {sig.at("positive").get<int>(), sig.at("negative").get<int>()};
    } else {
      throw ConfigError("chart description: 'signature' must be [p, q]");
    }
    const auto& entries = require("diagonal_entries");
    if (!entries.is_array() || static_cast<int>(entries.size()) != n)
      throw ConfigError("chart description: 'diagonal_entries' needs " + std::to_string(n) + " expressions");
    std::vector<Expression> diag;
    for (const auto& e : entries) diag.emplace_back(e.get<std::string>(), n);
    auto metric = [diag](const Vec& x) -> Mat {
      Vec values(static_cast<Eigen::Index>(diag.size()));
      for (std::size_t i = 0; i < diag.size(); ++i)
        values[static_cast<Eigen::Index>(i)] = diag[i](std::span<const double>(x.data(), x.size()));
      return values.asDiagonal();
    };
    auto region = [metric](const Vec& x) {
      const Mat g = metric(x);
      return g.allFinite() && std::abs(g.determinant()) > kDegenerate;
    };
    return MetricChart(name, n, signature, metric, region);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("chart description: ") + e.what());
  }
}

}  // namespace fractoid::geometry
