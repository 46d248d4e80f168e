#include "fractoid/nelson.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "fractoid/error.hpp"
#include "fractoid/expression.hpp"
#include "fractoid/parallel.hpp"
#include "fractoid/rng.hpp"
#include "fractoid/stats.hpp"

namespace fractoid::nelson {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNodalThreshold = 1e-12;

std::vector<std::size_t> strides(const std::vector<int>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (int j = static_cast<int>(shape.size()) - 2; j >= 0; --j) s[j] = s[j + 1] * static_cast<std::size_t>(shape[j + 1]);
  return s;
}

std::size_t lattice_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int s : shape) {
    if (s < 1) throw ParameterError("grid axes need at least one node");
    n *= static_cast<std::size_t>(s);
  }
  return n;
}

// Coordinate of `index` along axis j.
int coordinate(std::size_t index, const std::vector<int>& shape, const std::vector<std::size_t>& stride, int j) {
  return static_cast<int>((index / stride[j]) % static_cast<std::size_t>(shape[j]));
}

// Σ_λ (2φ(x) − φ(x − e_λ) − φ(x + e_λ)) for real or complex values.
template <class T>
std::vector<T> minus_laplacian(const std::vector<T>& phi, const std::vector<int>& shape, bool periodic) {
  const std::size_t n = lattice_size(shape);
  if (phi.size() != n) throw ParameterError("values do not match the lattice shape");
  const auto stride = strides(shape);
  std::vector<T> out(n, T{});
  for (std::size_t i = 0; i < n; ++i) {
    T acc{};
    for (int j = 0; j < static_cast<int>(shape.size()); ++j) {
      const int c = coordinate(i, shape, stride, j);
      const auto neighbour = [&](int offset) -> T {
        int m = c + offset;
        if (m < 0 || m >= shape[j]) {
          if (!periodic) return T{};
          m = (m + shape[j]) % shape[j];
        }
        return phi[i + (static_cast<std::ptrdiff_t>(m) - c) * static_cast<std::ptrdiff_t>(stride[j])];
      };
      acc += 2.0 * phi[i] - neighbour(-1) - neighbour(+1);
    }
    out[i] = acc;
  }
  return out;
}

// Multilinear interpolation of node vectors; points outside extrapolate from the edge cell.
class NodeInterpolator {
 public:
  NodeInterpolator(const WaveFunctionGrid& grid, std::vector<Vec> values)
      : shape_(grid.shape), lower_(grid.lower), spacing_(grid.spacing), stride_(strides(grid.shape)),
        values_(std::move(values)) {}

  Vec operator()(const Vec& x) const {
    const int d = static_cast<int>(shape_.size());
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (int j = 0; j < d; ++j) {
      if (shape_[j] == 1) {
        base[j] = 0;
        frac[j] = 0.0;
        continue;
      }
      const double u = (x[j] - lower_[j]) / spacing_[j];
      base[j] = std::clamp(static_cast<int>(std::floor(u)), 0, shape_[j] - 2);
      frac[j] = u - base[j];
    }
    Vec out = Vec::Zero(values_.front().size());
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1.0;
      std::size_t index = 0;
      for (int j = 0; j < d; ++j) {
        const int bit = (corner >> j) & 1;
        if (shape_[j] == 1 && bit) {
          w = 0.0;
          break;
        }
        w *= bit ? frac[j] : 1.0 - frac[j];
        index += static_cast<std::size_t>(base[j] + bit) * stride_[j];
      }
      if (w != 0.0) out += w * values_[index];
    }
    return out;
  }

 private:
  std::vector<int> shape_;
  Vec lower_, spacing_;
  std::vector<std::size_t> stride_;
  std::vector<Vec> values_;
};

// ∇ψ/ψ by central differences of a closed-form ψ.
Eigen::VectorXcd log_gradient(const ComplexField& psi, const Vec& x) {
  const Complex centre = psi(x);
  Eigen::VectorXcd g(x.size());
  if (std::abs(centre) <= kNodalThreshold) return g.setConstant(Complex(kNaN, kNaN));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    Vec a = x, b = x;
    a[j] += h;
    b[j] -= h;
    g[j] = (psi(a) - psi(b)) / (2.0 * h) / centre;
  }
  return g;
}

}  // namespace

std::size_t WaveFunctionGrid::size() const noexcept {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(std::max(s, 0));
  return n;
}

Vec WaveFunctionGrid::node(std::size_t index) const {
  const auto stride = strides(shape);
  Vec x(dimension());
  for (int j = 0; j < dimension(); ++j) x[j] = lower[j] + coordinate(index, shape, stride, j) * spacing[j];
  return x;
}

double WaveFunctionGrid::cell_volume() const { return spacing.prod(); }

double WaveFunctionGrid::norm() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return std::sqrt(s * cell_volume());
}

void WaveFunctionGrid::validate() const {
  if (shape.empty()) throw ParameterError("wavefunction grid has no axes");
  if (lower.size() != dimension() || spacing.size() != dimension())
    throw ParameterError("wavefunction grid bounds do not match its axes");
  if (values.size() != lattice_size(shape)) throw ParameterError("wavefunction values do not match the grid shape");
  if (!(spacing.array() > 0.0).all()) throw ParameterError("grid spacing must be positive");
  if (!(hbar > 0.0) || !(mass > 0.0)) throw ParameterError("hbar and mass must be positive");
  for (const auto& v : values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw ParameterError("wavefunction has non-finite values");
  if (!(norm() > 0.0)) throw ParameterError("wavefunction has zero norm");
}

WaveFunctionGrid sample(const ComplexField& psi, const std::vector<int>& shape, const Vec& lower, const Vec& spacing,
                        double hbar, double mass) {
  WaveFunctionGrid g{shape, lower, spacing, {}, hbar, mass};
  g.values.resize(lattice_size(shape));
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = psi(g.node(i));
  g.validate();
  return g;
}

ComplexField named_wavefunction(std::string_view name, double hbar, double mass) {
  const auto call = parse_registry_call(name);
  const auto need = [&](std::size_t n) {
    if (call.args.size() != n)
      throw ConfigError("wavefunction '" + call.name + "' takes " + std::to_string(n) + " argument(s)");
  };
  if (call.name == "ho-ground") {
    need(1);
    const double a = mass * call.args[0] / hbar;
    if (!(a > 0.0)) throw ConfigError("ho-ground needs a positive omega");
    return [a](const Vec& x) {
      return Complex(std::pow(a / std::numbers::pi, 0.25 * x.size()) * std::exp(-0.5 * a * x.squaredNorm()), 0.0);
    };
  }
  if (call.name == "plane-wave") {
    need(1);
    const double k = call.args[0];
    return [k](const Vec& x) { return std::exp(Complex(0.0, k * x.sum())); };
  }
  if (call.name == "gaussian-packet") {
    need(1);
    const double s = call.args[0];
    if (!(s > 0.0)) throw ConfigError("gaussian-packet needs a positive sigma");
    return [s](const Vec& x) {
      return Complex(std::pow(2.0 * std::numbers::pi * s * s, -0.25 * x.size()) *
                         std::exp(-x.squaredNorm() / (4.0 * s * s)),
                     0.0);
    };
  }
  std::string known;
  for (const auto& n : registered_wavefunctions()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown wavefunction '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> registered_wavefunctions() {
  return {"ho-ground(omega)", "plane-wave(k)", "gaussian-packet(sigma)"};
}

PotentialField named_potential(std::string_view name, double mass) {
  const auto call = parse_registry_call(name);
  if (call.name == "zero" && call.args.empty()) return {[](const Vec&) { return 0.0; }, "zero"};
  if (call.name == "constant" && call.args.size() == 1) {
    const double c = call.args[0];
    return {[c](const Vec&) { return c; }, std::string(name)};
  }
  if (call.name == "harmonic" && call.args.size() == 1) {
    const double k = 0.5 * mass * call.args[0] * call.args[0];
    return {[k](const Vec& x) { return k * x.squaredNorm(); }, std::string(name)};
  }
  throw ConfigError("unknown potential '" + std::string(name) + "' (known: zero, constant(c), harmonic(omega))");
}

stochastic::ItoProcessSpec NelsonProcessSpec::forward_process() const {
  const auto v = current, u = osmotic;
  return {[v, u](double t, const Vec& x) -> Vec { return v(t, x) + u(t, x); }, epsilon, dimension, {}, 0, "nelson"};
}

NelsonProcessSpec drift_from_wavefunction(const WaveFunctionGrid& psi) {
  psi.validate();
  const int d = psi.dimension();
  const auto stride = strides(psi.shape);
  const double scale = psi.hbar / psi.mass;
  NelsonProcessSpec out;
  out.dimension = d;
  out.epsilon = std::sqrt(scale);
  std::vector<Vec> v(psi.size(), Vec::Zero(d)), u(psi.size(), Vec::Zero(d));
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const Complex centre = psi.values[i];
    if (std::abs(centre) <= kNodalThreshold) {
      out.masked.push_back(i);
      v[i].setConstant(kNaN);
      u[i].setConstant(kNaN);
      continue;
    }
    for (int j = 0; j < d; ++j) {
      const int c = coordinate(i, psi.shape, stride, j);
      if (psi.shape[j] == 1) continue;
      const std::size_t lo = c > 0 ? i - stride[j] : i;
      const std::size_t hi = c + 1 < psi.shape[j] ? i + stride[j] : i;
      const double width = static_cast<double>((hi - lo) / stride[j]) * psi.spacing[j];
      const Complex g = (psi.values[hi] - psi.values[lo]) / width / centre;
      v[i][j] = scale * g.imag();
      u[i][j] = scale * g.real();
    }
  }
  if (!out.masked.empty())
    out.warnings.push_back(std::to_string(out.masked.size()) + " nodal grid points masked (|psi| <= 1e-12)");
  const NodeInterpolator vi(psi, std::move(v)), ui(psi, std::move(u));
  out.current = [vi](double, const Vec& x) { return vi(x); };
  out.osmotic = [ui](double, const Vec& x) { return ui(x); };
  return out;
}

NelsonProcessSpec drift_from_wavefunction(const ComplexField& psi, int dimension, double hbar, double mass) {
  if (!(hbar > 0.0) || !(mass > 0.0)) throw ParameterError("hbar and mass must be positive");
  const double scale = hbar / mass;
  NelsonProcessSpec out;
  out.dimension = dimension;
  out.epsilon = std::sqrt(scale);
  out.current = [psi, scale](double, const Vec& x) -> Vec { return scale * log_gradient(psi, x).imag(); };
  out.osmotic = [psi, scale](double, const Vec& x) -> Vec { return scale * log_gradient(psi, x).real(); };
  return out;
}

NewtonNelsonReport newton_nelson_residual(const stochastic::PathEnsemble& ensemble, const VectorField& force,
                                          double mass, const geometry::MetricChart& chart, bool include_ricci,
                                          const meanderiv::EstimatorConfig& config, double hbar,
                                          const std::function<bool(const Vec&)>& select) {
  if (!(mass > 0.0) || !(hbar >= 0.0)) throw ParameterError("mass must be positive and hbar non-negative");
  NewtonNelsonReport out;
  const auto field =
      meanderiv::velocity_fields(meanderiv::estimate_forward(ensemble, config), meanderiv::estimate_backward(ensemble, config));
  const double epsilon = std::sqrt(hbar / mass);
  const auto accel = meanderiv::acceleration_decomposed(field, chart, epsilon);
  out.warnings = accel.warnings;
  std::vector<Vec> ricci;
  if (include_ricci) ricci = meanderiv::ricci_correction(chart, field, hbar / mass);
  const std::size_t n = field.size();
  std::vector<double> rel, res;
  for (std::size_t b = 0; b < n; ++b) {
    out.position.push_back(field.position(b));
    out.count.push_back(std::min(field.forward.count[b], field.backward.count[b]));
    Vec a = accel.value[b];
    if (include_ricci && accel.valid[b]) a += ricci[b];
    out.acceleration.push_back(a);
    const bool populated = field.populated(b);
    out.populated += populated;
    Vec target = Vec::Constant(a.size(), kNaN);
    if (populated) target = force(field.position(b)) / mass;
    out.target.push_back(target);
    const double r = (a - target).norm();
    const double scale = target.norm();
    out.residual.push_back(r);
    out.relative.push_back(scale > 0.0 ? r / scale : r);
    const bool use = populated && accel.valid[b] && (!select || select(field.position(b)));
    out.used.push_back(use);
    if (use) {
      rel.push_back(out.relative.back());
      res.push_back(r);
    }
  }
  if (rel.empty())
    throw EstimationError("insufficient samples: no selected bin has " + std::to_string(config.min_count) +
                          " samples and populated neighbours");
  out.median_relative = stats::median(rel);
  out.p90_relative = stats::quantile(rel, 0.9);
  out.median_residual = stats::median(res);
  return out;
}

QuadraticVariationLaw quadratic_variation_law(const stochastic::PathEnsemble& ensemble,
                                              const meanderiv::EstimatorConfig& config,
                                              const geometry::MetricChart& chart, double hbar_over_m,
                                              double tolerance) {
  if (hbar_over_m < 0.0) throw ParameterError("hbar/m must be non-negative");
  QuadraticVariationLaw out;
  out.estimates = meanderiv::quadratic_variation_matrix(ensemble, config);
  const int d = ensemble.dimension();
  out.expected.assign(out.estimates.size(), Mat::Constant(d, d, kNaN));
  if (hbar_over_m == 0.0) {
    out.message = "deterministic ensemble: hbar/m = 0 leaves no quadratic variation to test";
    return out;
  }
  const auto metric = meanderiv::bin_average(ensemble, config, d * d, [&](double, const Vec& x) -> Vec {
    return Eigen::Map<const Vec>(Mat(chart.inverse_metric(x)).data(), d * d);
  });
  for (std::size_t b = 0; b < out.estimates.size(); ++b) {
    if (!out.estimates.populated(b)) continue;
    const Mat expected = hbar_over_m * metric.matrix(b);
    out.expected[b] = expected;
    const Mat m = out.estimates.matrix(b), se = out.estimates.matrix_error(b);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) {
          out.worst_diagonal = std::max(out.worst_diagonal, std::abs(m(i, i) / expected(i, i) - 1.0));
        } else {
          const double z = se(i, j) > 0.0 ? std::abs(m(i, j) - expected(i, j)) / se(i, j)
                                          : (m(i, j) == expected(i, j) ? 0.0 : HUGE_VAL);
          out.worst_off_diagonal_z = std::max(out.worst_off_diagonal_z, z);
        }
      }
  }
  out.pass = out.worst_diagonal <= tolerance && out.worst_off_diagonal_z <= 3.0;
  std::ostringstream msg;
  msg << "worst diagonal deviation " << out.worst_diagonal << ", worst off-diagonal z " << out.worst_off_diagonal_z;
  out.message = msg.str();
  return out;
}

std::vector<double> discrete_laplacian(const std::vector<double>& phi, const std::vector<int>& shape, bool periodic) {
  return minus_laplacian(phi, shape, periodic);
}

WaveFunctionGrid grid_schrodinger_apply(const WaveFunctionGrid& psi, const PotentialField& potential) {
  psi.validate();
  const double h = psi.spacing[0];
  if ((psi.spacing.array() - h).abs().maxCoeff() > 1e-12 * h)
    throw ParameterError("grid_schrodinger_apply needs equal spacing on every axis");
  const auto lap = minus_laplacian(psi.values, psi.shape, true);
  WaveFunctionGrid out = psi;
  const double kinetic = psi.hbar * psi.hbar / (2.0 * psi.mass * h * h);
  for (std::size_t i = 0; i < psi.size(); ++i) out.values[i] = kinetic * lap[i] + potential.value(psi.node(i)) * psi.values[i];
  return out;
}

WaveFunctionGrid free_propagator(const WaveFunctionGrid& psi0, double t) {
  psi0.validate();
  if (psi0.dimension() != 1) throw ParameterError("free_propagator works on 1-D grids");
  if (t == 0.0) return psi0;
  const double h = psi0.spacing[0];
  const double fresnel = std::sqrt(4.0 * std::numbers::pi * std::abs(t));
  if (fresnel < 2.0 * h) {
    std::ostringstream msg;
    msg << "grid too coarse for the free kernel at t = " << t << ": Fresnel width " << fresnel << " spans "
        << fresnel / h << " cells, need 2 (use h <= " << fresnel / 2.0 << ")";
    throw ResolutionError(msg.str());
  }
  const std::size_t n = psi0.size();
  const Complex prefactor = h / std::sqrt(Complex(0.0, 4.0 * std::numbers::pi * t));
  WaveFunctionGrid out = psi0;
  parallel_chunks(n, 64, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double x = psi0.node(i)[0];
      Complex sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double r = x - (psi0.lower[0] + static_cast<double>(j) * h);
        sum += std::polar(1.0, r * r / (4.0 * t)) * psi0.values[j];
      }
      out.values[i] = prefactor * sum;
    }
  });
  return out;
}

double l2_distance(const WaveFunctionGrid& a, const WaveFunctionGrid& b) {
  if (a.shape != b.shape) throw ParameterError("grids differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::norm(a.values[i] - b.values[i]);
  return std::sqrt(s * a.cell_volume());
}

Estimate feynman_kac_semigroup(const PotentialField& potential, const ScalarField& phi, double t, const Vec& x,
                               std::size_t n_paths, std::uint64_t seed, std::size_t steps) {
  if (!(t > 0.0)) throw ParameterError("t must be positive");
  if (n_paths < 2) throw ParameterError("N must be at least 2");
  if (steps < 1) throw ParameterError("steps must be at least 1");
  const int d = static_cast<int>(x.size());
  const double dt = t / static_cast<double>(steps);
  const double root = std::sqrt(dt);
  const auto total = parallel_reduce<stats::RunningStats>(
      n_paths, [] { return stats::RunningStats{}; },
      [&](stats::RunningStats& acc, std::size_t begin, std::size_t end) {
        std::vector<double> z(static_cast<std::size_t>(d) * steps);
        for (std::size_t i = begin; i < end; ++i) {
          NormalStream(seed, i).fill(0, z.data(), z.size());
          Vec w = x;
          double v_prev = potential.value(w), exponent = 0.0;
          for (std::size_t k = 0; k < steps; ++k) {
            for (int j = 0; j < d; ++j) w[j] += root * z[k * d + j];
            const double v = potential.value(w);
            exponent += 0.5 * (v_prev + v) * dt;
            v_prev = v;
          }
          const double weight = std::exp(-exponent) * phi(w);
          if (!std::isfinite(weight))
            throw SimulationError("Feynman-Kac weight is not finite on path " + std::to_string(i));
          acc.add(weight);
        }
      },
      [](stats::RunningStats& a, const stats::RunningStats& b) { a.merge(b); });
  return {total.mean(), total.standard_error()};
}

void write_wavefunction(const WaveFunctionGrid& psi, const std::filesystem::path& csv,
                        const std::filesystem::path& manifest) {
  psi.validate();
  std::ofstream out(csv);
  if (!out) throw ParameterError("cannot write " + csv.string());
  for (int j = 0; j < psi.dimension(); ++j) out << 'x' << j << ',';
  out << "re,im\n";
  char buf[32];
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const Vec x = psi.node(i);
    for (int j = 0; j < psi.dimension(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", x[j]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,", psi.values[i].real());
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g\n", psi.values[i].imag());
    out << buf;
  }
  const nlohmann::json m = {
      {"hbar", psi.hbar},
      {"mass", psi.mass},
      {"grid",
       {{"shape", psi.shape},
        {"lower", std::vector<double>(psi.lower.data(), psi.lower.data() + psi.lower.size())},
        {"spacing", std::vector<double>(psi.spacing.data(), psi.spacing.data() + psi.spacing.size())}}}};
  std::ofstream(manifest) << m.dump(2) << '\n';
}

WaveFunctionGrid read_wavefunction(const std::filesystem::path& csv, const std::filesystem::path& manifest) {
  std::ifstream min(manifest);
  if (!min) throw ConfigError("cannot open " + manifest.string());
  nlohmann::json m;
  try {
    min >> m;
    WaveFunctionGrid g;
    g.hbar = m.at("hbar").get<double>();
    g.mass = m.at("mass").get<double>();
    g.shape = m.at("grid").at("shape").get<std::vector<int>>();
    const auto lower = m.at("grid").at("lower").get<std::vector<double>>();
    const auto spacing = m.at("grid").at("spacing").get<std::vector<double>>();
    g.lower = Eigen::Map<const Vec>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    g.spacing = Eigen::Map<const Vec>(spacing.data(), static_cast<Eigen::Index>(spacing.size()));
    std::ifstream in(csv);
    if (!in) throw ConfigError("cannot open " + csv.string());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> cells;
      std::istringstream fields(line);
      for (std::string cell; std::getline(fields, cell, ',');) cells.push_back(std::strtod(cell.c_str(), nullptr));
      if (static_cast<int>(cells.size()) != g.dimension() + 2)
        throw ConfigError(csv.string() + ": row with the wrong number of columns");
      g.values.emplace_back(cells[cells.size() - 2], cells.back());
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
}

}  // namespace fractoid::nelson
