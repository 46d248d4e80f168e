#include "oracles/oracles.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace fractoid::oracle {

namespace {

Vec bump(const Vec& x, int i, double h) {
  Vec y = x;
  y[i] += h;
  return y;
}

}  // namespace

std::vector<Mat> christoffel(const MetricFn& g, const Vec& x, double h) {
  const int n = static_cast<int>(x.size());
  std::vector<Mat> dg(n);
  for (int l = 0; l < n; ++l) dg[l] = (g(bump(x, l, h)) - g(bump(x, l, -h))) / (2.0 * h);
  const Mat inv = g(x).inverse();
  // lowered[l](i, j) = Γ_lij
  std::vector<Mat> lowered(n, Mat::Zero(n, n));
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) lowered[l](i, j) = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
  std::vector<Mat> gamma(n, Mat::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) gamma[k] += inv(k, l) * lowered[l];
  return gamma;
}

double gaussian_curvature(const MetricFn& g, const Vec& x, double h) {
  auto e = [&](const Vec& p) { return g(p)(0, 0); };
  auto gg = [&](const Vec& p) { return g(p)(1, 1); };
  auto root = [&](const Vec& p) { return std::sqrt(e(p) * gg(p)); };
  auto gu_over = [&](const Vec& p) { return (gg(bump(p, 0, h)) - gg(bump(p, 0, -h))) / (2.0 * h) / root(p); };
  auto ev_over = [&](const Vec& p) { return (e(bump(p, 1, h)) - e(bump(p, 1, -h))) / (2.0 * h) / root(p); };
  const double d_u = (gu_over(bump(x, 0, h)) - gu_over(bump(x, 0, -h))) / (2.0 * h);
  const double d_v = (ev_over(bump(x, 1, h)) - ev_over(bump(x, 1, -h))) / (2.0 * h);
  return -(d_u + d_v) / (2.0 * root(x));
}

double laplacian_divergence(const MetricFn& g, const std::function<double(const Vec&)>& f, const Vec& x,
                            double h) {
  const int n = static_cast<int>(x.size());
  auto sqrt_det = [&](const Vec& p) { return std::sqrt(std::abs(g(p).determinant())); };
  // Flux component i at p: |g|^{1/2} g^{ij} ∂_j f.
  auto flux = [&](const Vec& p, int i) {
    const Mat inv = g(p).inverse();
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += inv(i, j) * (f(bump(p, j, h)) - f(bump(p, j, -h))) / (2.0 * h);
    return sqrt_det(p) * sum;
  };
  double div = 0.0;
  for (int i = 0; i < n; ++i) div += (flux(bump(x, i, h), i) - flux(bump(x, i, -h), i)) / (2.0 * h);
  return div / sqrt_det(x);
}

Mat expm_symmetric(const Mat& a, double t) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(a);
  const Vec scaled = (t * eig.eigenvalues().array()).exp().matrix();
  return eig.eigenvectors() * scaled.asDiagonal() * eig.eigenvectors().transpose();
}

double heat_semigroup_grid(const std::function<double(double)>& potential, const std::function<double(double)>& phi,
                           double t, double x, double half_width, int n) {
  const double h = 2.0 * half_width / (n + 1);
  Mat s = Mat::Zero(n, n);
  Vec values(n);
  for (int i = 0; i < n; ++i) {
    const double xi = -half_width + (i + 1) * h;
    s(i, i) = 1.0 / (h * h) + potential(xi);
    if (i > 0) s(i, i - 1) = -0.5 / (h * h);
    if (i + 1 < n) s(i, i + 1) = -0.5 / (h * h);
    values[i] = phi(xi);
  }
  const Vec u = expm_symmetric(s, -t) * values;
  // Cubic Lagrange interpolation on the four nodes around x.
  const double pos = (x + half_width) / h - 1.0;
  int base = static_cast<int>(std::floor(pos)) - 1;
  base = std::max(0, std::min(n - 4, base));
  double out = 0.0;
  for (int a = 0; a < 4; ++a) {
    double weight = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) weight *= (pos - (base + b)) / static_cast<double>(a - b);
    out += weight * u[base + a];
  }
  return out;
}

Vec sphere_latitude_transport(double theta0, const Vec& v0, int steps) {
  // dv^θ/dφ = sinθ cosθ v^φ,  dv^φ/dφ = −cotθ v^θ  along θ = θ0.
  const double s = std::sin(theta0), c = std::cos(theta0);
  auto rate = [&](const Vec& v) {
    Vec out(2);
    out[0] = s * c * v[1];
    out[1] = -(c / s) * v[0];
    return out;
  };
  const double h = 2.0 * M_PI / steps;
  Vec v = v0;
  for (int k = 0; k < steps; ++k) {
    const Vec k1 = rate(v);
    const Vec k2 = rate(v + 0.5 * h * k1);
    const Vec k3 = rate(v + 0.5 * h * k2);
    const Vec k4 = rate(v + h * k3);
    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return v;
}

std::complex<double> free_gaussian(double x, double t) {
  const std::complex<double> a(1.0, 2.0 * t);
  return std::exp(-x * x / (2.0 * a)) / std::sqrt(a);
}

double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels < 2 || panels % 2) throw std::invalid_argument("simpson: even panel count required");
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

}  // namespace fractoid::oracle
