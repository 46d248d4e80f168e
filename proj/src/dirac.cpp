#include "fractoid/dirac.hpp"

#include <cmath>

#include "fractoid/error.hpp"
#include "fractoid/parallel.hpp"

namespace fractoid::dirac {

namespace {

constexpr double kNullThreshold = 1e-10;
const Complex I(0.0, 1.0);

Matrix4 block(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b, const Eigen::Matrix2cd& c,
              const Eigen::Matrix2cd& d) {
  Matrix4 m;
  m << a, b, c, d;
  return m;
}

Spinor central(const std::function<Spinor(double)>& f, double h) { return (f(h) - f(-h)) / (2.0 * h); }

}  // namespace

Matrix4 GammaSet::slash(const Vector4& omega) const {
  Matrix4 m = Matrix4::Zero();
  for (int mu = 0; mu < 4; ++mu) m += omega[mu] * gamma[static_cast<std::size_t>(mu)];
  return m;
}

double anticommutator_defect(const GammaSet& g) {
  const Vector4 eta = GammaSet::metric();
  double worst = 0.0;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      const auto& a = g.gamma[static_cast<std::size_t>(mu)];
      const auto& b = g.gamma[static_cast<std::size_t>(nu)];
      Matrix4 expect = Matrix4::Zero();
      if (mu == nu) expect = 2.0 * eta[mu] * Matrix4::Identity();
      worst = std::max(worst, (a * b + b * a - expect).cwiseAbs().maxCoeff());
    }
  return worst;
}

double chirality_defect(const GammaSet& g) {
  double worst = (g.gamma5 * g.gamma5 - Matrix4::Identity()).cwiseAbs().maxCoeff();
  for (const auto& m : g.gamma) worst = std::max(worst, (g.gamma5 * m + m * g.gamma5).cwiseAbs().maxCoeff());
  return worst;
}

GammaSet build_gammas(std::string_view convention) {
  if (convention != "dirac-basis")
    throw ConfigError("unknown gamma convention '" + std::string(convention) + "' (known: dirac-basis)");
  const Eigen::Matrix2cd one = Eigen::Matrix2cd::Identity(), zero = Eigen::Matrix2cd::Zero();
  Eigen::Matrix2cd s1, s2, s3;
  s1 << 0, 1, 1, 0;
  s2 << 0, -I, I, 0;
  s3 << 1, 0, 0, -1;
  GammaSet g;
  g.convention = "dirac-basis";
  g.gamma[0] = block(one, zero, zero, -one);
  g.gamma[1] = block(zero, s1, -s1, zero);
  g.gamma[2] = block(zero, s2, -s2, zero);
  g.gamma[3] = block(zero, s3, -s3, zero);
  g.gamma5 = block(zero, one, one, zero);
  if (anticommutator_defect(g) != 0.0) throw ConventionError("gamma matrices violate the anticommutation relation");
  const Matrix4 product = I * g.gamma[0] * g.gamma[1] * g.gamma[2] * g.gamma[3];
  if ((product - g.gamma5).cwiseAbs().maxCoeff() != 0.0)
    throw ConventionError("γ⁵ differs from iγ⁰γ¹γ²γ³");
  return g;
}

double klein_gordon_residual(const Vector4& p, double m) {
  return std::abs(-p[0] * p[0] + p.tail<3>().squaredNorm() + m * m);
}

Matrix4 momentum_slash(const Vector4& p, const GammaSet& gammas) {
  return gammas.slash(GammaSet::metric().cwiseProduct(p));
}

double dirac_residual(const Vector4& p, double m, const Spinor& u, const GammaSet& gammas) {
  const double norm = u.norm();
  if (!(norm > 0.0)) throw ParameterError("spinor must be non-zero");
  return ((momentum_slash(p, gammas) - m * Matrix4::Identity()) * u).norm() / norm;
}

PlaneWaveSpinor dirac_plane_wave(const Eigen::Vector3d& momentum, double m, const GammaSet& gammas) {
  if (!(m > 0.0)) throw ParameterError("plane-wave mass must be positive");
  if (!momentum.allFinite()) throw ParameterError("momentum must be finite");
  PlaneWaveSpinor out;
  out.mass = m;
  out.p << std::sqrt(momentum.squaredNorm() + m * m), momentum;
  const Matrix4 op = momentum_slash(out.p, gammas) - m * Matrix4::Identity();
  Eigen::JacobiSVD<Matrix4> svd(op, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double cut = kNullThreshold * std::max(sigma[0], 1.0);
  int rank = 0;
  while (rank < 4 && sigma[rank] > cut) ++rank;
  if (rank == 4)
    throw ConventionError("no spinor solves the Dirac equation for this momentum; smallest singular value " +
                          std::to_string(sigma[3]) + " (metric and gamma conventions disagree?)");
  out.null_space = svd.matrixV().rightCols(4 - rank);
  out.u = out.null_space.col(0);
  return out;
}

std::size_t SpinorGrid::size() const noexcept {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(std::max(s, 0));
  return n;
}

Vector4 SpinorGrid::node(std::size_t index) const {
  Vector4 x;
  for (int a = 3; a >= 0; --a) {
    const auto n = static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
    x[a] = lower[a] + static_cast<double>(index % n) * spacing[a];
    index /= n;
  }
  return x;
}

std::size_t SpinorGrid::shifted(std::size_t index, int axis, int step) const {
  std::size_t stride = 1;
  for (int a = 3; a > axis; --a) stride *= static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
  const auto n = static_cast<long long>(shape[static_cast<std::size_t>(axis)]);
  const auto i = static_cast<long long>((index / stride) % static_cast<std::size_t>(n));
  const long long j = ((i + step) % n + n) % n;
  return index + static_cast<std::size_t>((j - i) * static_cast<long long>(stride));
}

void SpinorGrid::validate() const {
  for (int a = 0; a < 4; ++a) {
    if (shape[static_cast<std::size_t>(a)] < 1) throw ParameterError("spinor grid axes need at least one node");
    if (shape[static_cast<std::size_t>(a)] > 1 && !(spacing[a] > 0.0))
      throw ParameterError("spinor grid spacing must be positive");
  }
  if (values.size() != size())
    throw ParameterError("spinor grid holds " + std::to_string(values.size()) + " values for " +
                         std::to_string(size()) + " nodes");
}

SpinorGrid sample_spinor(const std::function<Spinor(const Vector4&)>& psi, const std::array<int, 4>& shape,
                         const Vector4& lower, const Vector4& spacing) {
  SpinorGrid g;
  g.shape = shape;
  g.lower = lower;
  g.spacing = spacing;
  g.values.resize(g.size());
  g.validate();
  parallel_chunks(g.values.size(), 4096, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) g.values[i] = psi(g.node(i));
  });
  return g;
}

SpinorGrid dirac_operator_fd(const SpinorGrid& psi, const GammaSet& gammas) {
  psi.validate();
  // Non-zero entries of γ^μ / 2h_μ; every standard representation has one per row.
  struct Entry {
    int row, col;
    Complex value;
  };
  std::array<std::vector<Entry>, 4> entries;
  for (int mu = 0; mu < 4; ++mu) {
    if (psi.shape[static_cast<std::size_t>(mu)] < 2) continue;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (const Complex v = gammas.gamma[static_cast<std::size_t>(mu)](r, c); v != Complex(0.0))
          entries[static_cast<std::size_t>(mu)].push_back({r, c, v / (2.0 * psi.spacing[mu])});
  }
  std::array<std::size_t, 4> stride{}, extent{};
  std::size_t running = 1;
  for (int a = 3; a >= 0; --a) {
    extent[static_cast<std::size_t>(a)] = static_cast<std::size_t>(psi.shape[static_cast<std::size_t>(a)]);
    stride[static_cast<std::size_t>(a)] = running;
    running *= extent[static_cast<std::size_t>(a)];
  }
  SpinorGrid out = psi;
  parallel_chunks(psi.values.size(), 4096, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Spinor sum = Spinor::Zero();
      for (std::size_t mu = 0; mu < 4; ++mu) {
        const auto& list = entries[mu];
        if (list.empty()) continue;
        const std::size_t n = extent[mu], step = stride[mu], k = (i / step) % n;
        const std::size_t up = k + 1 == n ? i - (n - 1) * step : i + step;
        const std::size_t down = k == 0 ? i + (n - 1) * step : i - step;
        const Spinor d = psi.values[up] - psi.values[down];
        for (const auto& e : list) sum[e.row] += e.value * d[e.col];
      }
      out.values[i] = sum;
    }
  });
  return out;
}

double clifford_relation_check(const Vector4& omega1, const Vector4& omega2, const GammaSet& gammas,
                               const Vector4& inverse_metric) {
  const Matrix4 a = gammas.slash(omega1), b = gammas.slash(omega2);
  const double pairing = omega1.cwiseProduct(inverse_metric).dot(omega2);
  return (a * b + b * a + 2.0 * pairing * Matrix4::Identity()).norm();
}

int clifford_sign(const GammaSet& gammas) {
  const Vector4 chart(-1.0, 1.0, 1.0, 1.0);
  int found = 0, sign = 0;
  for (int s : {1, -1}) {
    bool ok = true;
    for (int mu = 0; mu < 4 && ok; ++mu)
      for (int nu = 0; nu < 4 && ok; ++nu) {
        const Vector4 a = Vector4::Unit(mu), b = Vector4::Unit(nu);
        ok = clifford_relation_check(a, b, gammas, static_cast<double>(s) * chart) <= 1e-12;
      }
    if (ok) {
      ++found;
      sign = s;
    }
  }
  if (found != 1) throw ConventionError("Clifford relation holds under " + std::to_string(found) + " global signs");
  return sign;
}

double clifford_connection_check(const OneFormField& omega, const Vector4& direction, const Vector4& x,
                                 const GammaSet& gammas, const SpinorField& probe) {
  const SpinorField psi = probe ? probe : SpinorField([](const Vector4&) { return Spinor::Constant(0.5); });
  const double h = 1e-5 * std::max(1.0, x.cwiseAbs().maxCoeff());
  const auto at = [&](double s) -> Vector4 { return x + s * direction; };
  // [∇_X, c(ω)]ψ = ∇_X(c(ω)ψ) − c(ω)∇_X ψ.
  const Spinor product = central([&](double s) -> Spinor { return gammas.slash(omega(at(s))) * psi(at(s)); }, h);
  const Spinor commutator = product - gammas.slash(omega(x)) * central([&](double s) { return psi(at(s)); }, h);
  Vector4 d_omega = (omega(at(h)) - omega(at(-h))) / (2.0 * h);
  return (commutator - gammas.slash(d_omega) * psi(x)).norm();
}

nlohmann::json gammas_to_json(const GammaSet& gammas) {
  const auto matrix = [](const Matrix4& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < 4; ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["convention"] = gammas.convention;
  j["metric"] = {1, -1, -1, -1};
  j["gamma"] = nlohmann::json::array();
  for (const auto& m : gammas.gamma) j["gamma"].push_back(matrix(m));
  j["gamma5"] = matrix(gammas.gamma5);
  return j;
}

GammaSet gammas_from_json(const nlohmann::json& j) {
  const auto matrix = [](const nlohmann::json& rows) {
    if (!rows.is_array() || rows.size() != 4) throw ConfigError("gamma matrix must have 4 rows");
    Matrix4 m;
    for (int r = 0; r < 4; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (!row.is_array() || row.size() != 4) throw ConfigError("gamma matrix rows must have 4 entries");
      for (int c = 0; c < 4; ++c) {
        const auto& e = row[static_cast<std::size_t>(c)];
        if (!e.is_array() || e.size() != 2) throw ConfigError("gamma entries are [re, im] pairs");
        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      }
    }
    return m;
  };
  try {
    GammaSet g;
    g.convention = j.at("convention").get<std::string>();
    const auto& list = j.at("gamma");
    if (!list.is_array() || list.size() != 4) throw ConfigError("expected four gamma matrices");
    for (std::size_t mu = 0; mu < 4; ++mu) g.gamma[mu] = matrix(list[mu]);
    g.gamma5 = matrix(j.at("gamma5"));
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gamma set: ") + e.what());
  }
}

}  // namespace fractoid::dirac
