#include "fractoid/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "fractoid/dirac.hpp"
#include "fractoid/error.hpp"
#include "fractoid/geodesic.hpp"
#include "fractoid/geometry.hpp"
#include "fractoid/meanderiv.hpp"
#include "fractoid/nelson.hpp"
#include "fractoid/rng.hpp"
#include "fractoid/stats.hpp"
#include "fractoid/stochastic.hpp"
#include "fractoid/whitenoise.hpp"

namespace fractoid::suites {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

Vec scalar(double v) { return Vec::Constant(1, v); }
Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

std::vector<std::string> split_key(std::string_view key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (parts.back().empty()) throw ConfigError("malformed config key '" + std::string(key) + "'");
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

Check near(std::string name, int criterion, double value, double target, double tolerance) {
  Check c;
  c.name = std::move(name);
  c.criterion = criterion;
  c.value = value;
  c.target = target;
  c.tolerance = tolerance;
  c.rule = "|value - target| <= tolerance";
  c.pass = std::abs(value - target) <= tolerance;
  return c;
}

Check at_most(std::string name, int criterion, double value, double bound) {
  Check c = near(std::move(name), criterion, value, 0.0, bound);
  c.rule = "value <= tolerance";
  c.pass = value <= bound;
  return c;
}

// Runs one group of checks; any library error fails every named check with its message.
template <class Fn>
void run_group(SuiteReport& report, int criterion, const std::vector<std::string>& names, Fn&& fn) {
  const auto start = Clock::now();
  std::vector<Check> checks;
  try {
    checks = fn();
  } catch (const Error& e) {
    checks.clear();
    for (const auto& n : names) {
      Check c;
      c.name = n;
      c.criterion = criterion;
      c.value = kNaN;
      c.rule = "computation failed";
      c.detail = e.what();
      checks.push_back(c);
    }
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (!checks.empty()) checks.front().runtime_seconds = seconds;
  for (auto& c : checks) report.checks.push_back(std::move(c));
}

double z_score(double diff, double se) {
  if (diff == 0.0) return 0.0;
  return se > 0.0 ? std::abs(diff) / se : std::numeric_limits<double>::infinity();
}

meanderiv::EstimatorConfig box_1d(std::vector<meanderiv::TimeWindow> windows, double lo, double hi, int cells,
                                  std::size_t min_count) {
  meanderiv::EstimatorConfig c;
  c.grid.windows = std::move(windows);
  c.grid.lower = scalar(lo);
  c.grid.upper = scalar(hi);
  c.grid.cells = {cells};
  c.min_count = min_count;
  return c;
}

stochastic::ItoProcessSpec wiener(int d, double eps = 1.0) {
  return {[d](double, const Vec&) -> Vec { return Vec::Zero(d); }, eps, d, {}, 0, "zero"};
}

// ---------------------------------------------------------------- sphere-geometry

struct ChartCase {
  std::string name;
  std::vector<Vec> points;
  double curvature;
  std::function<std::vector<Mat>(const Vec&)> christoffel;  // closed form, result[k](i, j)
  ScalarField f;
  ScalarField laplacian;
};

std::vector<ChartCase> chart_cases() {
  std::vector<ChartCase> out;
  out.push_back({"polar2", {v2(1.3, 0.4), v2(0.7, 2.0)}, 0.0,
                 [](const Vec& x) {
                   std::vector<Mat> g(2, Mat::Zero(2, 2));
                   g[0](1, 1) = -x[0];
                   g[1](0, 1) = g[1](1, 0) = 1.0 / x[0];
                   return g;
                 },
                 [](const Vec& x) { return x[0] * x[0] * std::cos(x[1]); },
                 [](const Vec& x) { return 3.0 * std::cos(x[1]); }});
  out.push_back({"sphere2", {v2(0.8, 0.3), v2(2.1, 1.0)}, 1.0,
                 [](const Vec& x) {
                   std::vector<Mat> g(2, Mat::Zero(2, 2));
                   g[0](1, 1) = -std::sin(x[0]) * std::cos(x[0]);
                   g[1](0, 1) = g[1](1, 0) = std::cos(x[0]) / std::sin(x[0]);
                   return g;
                 },
                 [](const Vec& x) { return std::cos(x[0]); },
                 [](const Vec& x) { return -2.0 * std::cos(x[0]); }});
  out.push_back({"hyperbolic2", {v2(0.9, 0.5), v2(1.7, 2.5)}, -1.0,
                 [](const Vec& x) {
                   std::vector<Mat> g(2, Mat::Zero(2, 2));
                   g[0](1, 1) = -std::sinh(x[0]) * std::cosh(x[0]);
                   g[1](0, 1) = g[1](1, 0) = std::cosh(x[0]) / std::sinh(x[0]);
                   return g;
                 },
                 [](const Vec& x) { return std::cosh(x[0]); },
                 [](const Vec& x) { return 2.0 * std::cosh(x[0]); }});
  return out;
}

void sphere_geometry(SuiteReport& r, const Config& cfg) {
  for (const auto& cc : chart_cases()) {
    run_group(r, 1, {cc.name + "/christoffel", cc.name + "/ricci", cc.name + "/laplace-beltrami"}, [&] {
      const auto chart = geometry::make_chart(cc.name);
      double gamma = 0.0, ricci = 0.0, laplace = 0.0;
      for (const auto& x : cc.points) {
        const auto closed = cc.christoffel(x);
        for (auto mode : {geometry::Derivatives::automatic, geometry::Derivatives::finite_difference}) {
          const auto c = geometry::christoffel(chart, x, mode);
          for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < 2; ++j)
                gamma = std::max(gamma, std::abs(c(k, i, j) - closed[static_cast<std::size_t>(k)](i, j)));
          const Mat ric = geometry::ricci(chart, x, mode);
          ricci = std::max(ricci, (ric - cc.curvature * chart.metric(x)).cwiseAbs().maxCoeff());
        }
        laplace = std::max(laplace, std::abs(geometry::laplace_beltrami(chart, cc.f, x) - cc.laplacian(x)));
      }
      return std::vector<Check>{at_most(cc.name + "/christoffel", 1, gamma, 1e-4),
                                at_most(cc.name + "/ricci", 1, ricci, 1e-4),
                                at_most(cc.name + "/laplace-beltrami", 1, laplace, 1e-4)};
    });
  }

  run_group(r, 2, {"holonomy/angle", "holonomy/norm-drift"}, [&] {
    const auto sphere = geometry::make_chart("sphere2");
    const double theta0 = kPi / 3;
    const auto steps = static_cast<Eigen::Index>(cfg.count("steps", 10'000));
    if (steps < 1) throw ParameterError("steps must be positive");
    Mat path(steps + 1, 2);
    for (Eigen::Index k = 0; k <= steps; ++k)
      path.row(k) << theta0, 2.0 * kPi * static_cast<double>(k) / static_cast<double>(steps);
    const Vec v0 = v2(1.0, 0.0);
    const auto v = stochastic::parallel_transport(sphere, path, v0);
    const double angle = stochastic::rotation_angle(sphere, path.row(steps).transpose(), v0, v.back());
    double drift = 0.0;
    for (Eigen::Index k = 0; k <= steps; ++k) {
      const Vec x = path.row(k).transpose();
      const Vec& w = v[static_cast<std::size_t>(k)];
      drift = std::max(drift, std::abs(std::sqrt(w.dot(sphere.metric(x) * w)) - 1.0));
    }
    auto a = near("holonomy/angle", 2, angle, 2.0 * kPi * (1.0 - std::cos(theta0)), 1e-3);
    a.detail = std::to_string(steps) + " steps around the latitude pi/3";
    return std::vector<Check>{a, at_most("holonomy/norm-drift", 2, drift, 1e-4)};
  });
}

// ---------------------------------------------------------------- nelson-ho

void nelson_ho(SuiteReport& r, const Config& cfg) {
  const std::size_t n = cfg.count("N", 100'000);
  const std::uint64_t seed = cfg.seed();

  run_group(r, 3, {"qv-law/diagonal", "qv-law/off-diagonal-z"}, [&] {
    const double dt = cfg.number("qv.dt", 1e-3), horizon = cfg.number("qv.T", 0.02);
    const auto e = stochastic::simulate_ito(wiener(3), Vec::Zero(3), horizon, dt, n, seed);
    meanderiv::EstimatorConfig c;
    c.grid.windows = {{0, e.steps()}};
    c.grid.lower = Vec::Constant(3, -0.5);
    c.grid.upper = Vec::Constant(3, 0.5);
    c.grid.cells = {2, 2, 2};
    c.min_count = cfg.count("min_count", 200);
    const auto law = nelson::quadratic_variation_law(e, c, geometry::make_chart("euclidean:3"), 1.0, 0.02);
    if (law.estimates.populated_count() == 0) throw EstimationError("insufficient samples: no populated bin");
    auto d = at_most("qv-law/diagonal", 3, law.worst_diagonal, 0.02);
    d.detail = std::to_string(law.estimates.populated_count()) + " populated bins; " + law.message;
    return std::vector<Check>{d, at_most("qv-law/off-diagonal-z", 3, law.worst_off_diagonal_z, 3.0)};
  });

  run_group(r, 5, {"newton-nelson/median-relative"}, [&] {
    const double dt = cfg.number("nn.dt", 0.02), horizon = cfg.number("nn.T", 4.0);
    const auto spec = nelson::drift_from_wavefunction(nelson::named_wavefunction("ho-ground(1)"), 1).forward_process();
    stochastic::SimulationOptions options;
    const double sd = std::sqrt(1.0 / (2.0 - dt));
    options.initial = [sd](std::size_t, const NormalStream& s) { return scalar(sd * s(rng_offset::initial_conditions)); };
    const auto e = stochastic::simulate_ito(spec, scalar(0.0), horizon, dt, n, seed + 1, options);
    auto c = box_1d({{1, e.steps()}}, -2.2, 2.2, 11, cfg.count("min_count", 500));
    const auto select = [](const Vec& x) { return std::abs(x[0]) >= 0.2 && std::abs(x[0]) <= 1.5; };
    const auto res = nelson::newton_nelson_residual(e, [](const Vec& x) -> Vec { return -x; }, 1.0,
                                                    geometry::make_chart("euclidean:1"), false, c, 1.0, select);
    auto check = at_most("newton-nelson/median-relative", 5, res.median_relative, 0.10);
    std::size_t used = 0;
    Series s{"acceleration", {}, {}, {}};
    for (std::size_t b = 0; b < res.used.size(); ++b) {
      if (!res.used[b]) continue;
      ++used;
      s.x.push_back(res.position[b][0]);
      s.value.push_back(res.acceleration[b][0]);
      s.standard_error.push_back(kNaN);
    }
    if (used == 0) throw EstimationError("insufficient samples: no bin with |x| in [0.2, 1.5] reached min_count");
    check.detail = std::to_string(used) + " bins with |x| in [0.2, 1.5]";
    check.series.push_back(std::move(s));
    return std::vector<Check>{check};
  });
}

// ---------------------------------------------------------------- wiener-meanderiv

void wiener_meanderiv(SuiteReport& r, const Config& cfg) {
  const std::size_t n = cfg.count("N", 100'000);
  const std::uint64_t seed = cfg.seed();
  const double dt = cfg.number("dt", 0.01), horizon = cfg.number("T", 1.0);
  const std::size_t min_count = cfg.count("min_count", 200);

  run_group(r, 4, {"mean-derivatives/backward-z", "mean-derivatives/forward-z", "mean-derivatives/current-z",
                   "mean-derivatives/osmotic-z"},
            [&] {
              const auto e = stochastic::simulate_ito(wiener(1), scalar(0.0), horizon, dt, n, seed);
              auto c = box_1d(meanderiv::windows_at(e, {0.25, 0.5, 0.75}), -2.0, 2.0, 8, min_count);
              const auto field = meanderiv::velocity_fields(meanderiv::estimate_forward(e, c),
                                                            meanderiv::estimate_backward(e, c));
              double zb = 0.0, zf = 0.0, zc = 0.0, zo = 0.0;
              std::size_t used = 0;
              Series back{"backward", {}, {}, {}};
              for (std::size_t b = 0; b < field.size(); ++b) {
                if (!field.populated(b)) continue;
                ++used;
                const double x = field.position(b)[0], t = field.time(b);
                zb = std::max(zb, z_score(field.backward.mean[b][0] - x / t, field.backward.standard_error[b][0]));
                zf = std::max(zf, z_score(field.forward.mean[b][0], field.forward.standard_error[b][0]));
                zc = std::max(zc, z_score(field.current[b][0] - x / (2 * t), field.standard_error[b][0]));
                zo = std::max(zo, z_score(field.osmotic[b][0] + x / (2 * t), field.standard_error[b][0]));
                back.x.push_back(x);
                back.value.push_back(field.backward.mean[b][0]);
                back.standard_error.push_back(field.backward.standard_error[b][0]);
              }
              if (used == 0) throw EstimationError("insufficient samples: no populated bin");
              auto first = at_most("mean-derivatives/backward-z", 4, zb, 3.0);
              first.detail = std::to_string(used) + " populated bins at t = 0.25, 0.5, 0.75";
              first.series.push_back(std::move(back));
              return std::vector<Check>{first, at_most("mean-derivatives/forward-z", 4, zf, 3.0),
                                        at_most("mean-derivatives/current-z", 4, zc, 3.0),
                                        at_most("mean-derivatives/osmotic-z", 4, zo, 3.0)};
            });

  run_group(r, 6, {"covariant/ito-correction", "covariant/analytic-agreement-z"}, [&] {
    const auto e = stochastic::simulate_ito(wiener(1), scalar(0.0), horizon, dt, n, seed + 1);
    const auto chart = geometry::make_chart("euclidean:1");
    auto c = box_1d({{1, e.steps()}}, -2.0, 2.0, 8, min_count);
    const TimeVectorField square = [](double, const Vec& x) -> Vec { return scalar(x[0] * x[0]); };
    const TimeVectorField zero = [](double, const Vec&) -> Vec { return scalar(0.0); };
    const auto mc = meanderiv::covariant_mean_derivative(chart, e, square, meanderiv::Direction::forward, c);
    std::size_t total = 0;
    for (std::size_t b = 0; b < mc.size(); ++b)
      if (mc.populated(b)) total += mc.count[b];
    if (total == 0) throw EstimationError("insufficient samples: no populated bin");
    double pooled = 0.0, var = 0.0, worst = 0.0;
    for (std::size_t b = 0; b < mc.size(); ++b) {
      if (!mc.populated(b)) continue;
      const double share = static_cast<double>(mc.count[b]) / static_cast<double>(total);
      pooled += share * mc.mean[b][0];
      var += share * share * mc.standard_error[b][0] * mc.standard_error[b][0];
      const Vec analytic = meanderiv::covariant_mean_derivative_analytic(chart, square, zero, 1.0,
                                                                        meanderiv::Direction::forward, mc.time[b],
                                                                        mc.position[b]);
      worst = std::max(worst, z_score(mc.mean[b][0] - analytic[0], mc.standard_error[b][0]));
    }
    const double se = std::sqrt(var);
    auto ito = near("covariant/ito-correction", 6, pooled, 1.0, 3.0 * se);
    ito.detail = "pooled over " + std::to_string(mc.populated_count()) + " bins, standard error " +
                 std::to_string(se);
    return std::vector<Check>{ito, at_most("covariant/analytic-agreement-z", 6, worst, 3.0)};
  });
}

// ---------------------------------------------------------------- fractal-dim

void fractal_dim(SuiteReport& r, const Config& cfg) {
  run_group(r, 7, {"fractal/brownian-dimension", "fractal/line-dimension", "fractal/diffusion-coefficient"}, [&] {
    const std::vector<std::size_t> scales{1, 2, 4, 8, 16, 32};
    const double dt = cfg.number("dt", 1.0 / 1024), eps = cfg.number("epsilon", 1.0);
    const stochastic::ItoProcessSpec line{[](double, const Vec&) -> Vec { return scalar(1.0); }, 0.0, 1, {}, 0,
                                          "constant"};
    const auto straight = stochastic::fractal_scaling(stochastic::simulate_ito(line, scalar(0.0), 1.0, dt, 1, 1),
                                                      scales);
    const auto brownian = stochastic::simulate_ito(wiener(1, eps), scalar(0.0), 1.0, dt, cfg.count("N", 4000),
                                                   cfg.seed());
    const auto rep = stochastic::fractal_scaling(brownian, scales);
    auto dim = near("fractal/brownian-dimension", 7, rep.fitted_dimension, 2.0, 0.1);
    dim.detail = std::to_string(scales.size()) + " scales";
    Series s{"length", {}, {}, {}};
    for (std::size_t i = 0; i < rep.scales.size(); ++i) {
      s.x.push_back(rep.scales[i]);
      s.value.push_back(rep.lengths[i]);
      s.standard_error.push_back(kNaN);
    }
    dim.series.push_back(std::move(s));
    const double dm = eps * eps / 2;
    return std::vector<Check>{dim, near("fractal/line-dimension", 7, straight.fitted_dimension, 1.0, 0.01),
                              near("fractal/diffusion-coefficient", 7, rep.diffusion_coefficient, dm, 0.05 * dm)};
  });
}

// ---------------------------------------------------------------- feynman-kac

// e^{−tS} e^{−a y²} at x for S = −½Δ + ½x², from the Mehler kernel.
double mehler_gaussian(double x, double t, double a) {
  const double s = std::sinh(t), c = std::cosh(t);
  const double A = c / (2.0 * s) + a, B = x / s;
  return std::sqrt(kPi / A) / std::sqrt(2.0 * kPi * s) * std::exp(B * B / (4.0 * A) - x * x * c / (2.0 * s));
}

void feynman_kac(SuiteReport& r, const Config& cfg) {
  const double t = cfg.number("t", 0.5);
  run_group(r, 8, {"feynman-kac/probes"}, [&] {
    const std::size_t n = cfg.count("N", 100'000);
    const double allowance = cfg.number("allowance", 2e-3);
    const auto harmonic = nelson::named_potential("harmonic(1)");
    const ScalarField phi = [](const Vec& y) { return std::exp(-y.squaredNorm()); };
    double worst = -std::numeric_limits<double>::infinity();
    Series s{"semigroup", {}, {}, {}};
    for (double probe : {-1.0, 0.0, 0.7}) {
      const auto mc = nelson::feynman_kac_semigroup(harmonic, phi, t, scalar(probe), n, cfg.seed());
      const double exact = mehler_gaussian(probe, t, 1.0);
      worst = std::max(worst, std::abs(mc.value - exact) - 3.0 * mc.standard_error);
      s.x.push_back(probe);
      s.value.push_back(mc.value);
      s.standard_error.push_back(mc.standard_error);
    }
    auto c = at_most("feynman-kac/probes", 8, worst, allowance);
    c.rule = "max |mc - exact| - 3 se <= tolerance";
    c.detail = "probes -1, 0, 0.7 against the Mehler kernel";
    c.series.push_back(std::move(s));
    return std::vector<Check>{c};
  });

  run_group(r, 9, {"free-propagator/l2-error", "free-propagator/norm"}, [&] {
    const auto psi0 = nelson::sample([](const Vec& x) { return nelson::Complex(std::exp(-0.5 * x.squaredNorm())); },
                                     {601}, scalar(-15.0), scalar(0.05));
    const auto moved = nelson::free_propagator(psi0, t);
    auto exact = psi0;
    const nelson::Complex i(0.0, 1.0);
    for (std::size_t k = 0; k < exact.size(); ++k) {
      const double x = exact.node(k)[0];
      const nelson::Complex z = 1.0 + 2.0 * i * t;
      exact.values[k] = std::exp(-x * x / (2.0 * z)) / std::sqrt(z);
    }
    return std::vector<Check>{at_most("free-propagator/l2-error", 9, nelson::l2_distance(moved, exact), 1e-3),
                              near("free-propagator/norm", 9, moved.norm(), psi0.norm(), 1e-3)};
  });
}

// ---------------------------------------------------------------- geodesic-variational

Mat sine_perturbation(const geodesic::PathCurve& curve, std::uint64_t seed, std::uint64_t stream) {
  const NormalStream rng(seed, stream);
  const auto rows = curve.points.rows(), cols = curve.points.cols();
  Mat p = Mat::Zero(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (int m = 1; m <= 3; ++m) {
      const double c = 0.1 * rng(static_cast<std::uint64_t>(j * 3 + m));
      for (Eigen::Index k = 1; k + 1 < rows; ++k)
        p(k, j) += c * std::sin(m * kPi * static_cast<double>(k) / static_cast<double>(rows - 1));
    }
  return p;
}

void geodesic_variational(SuiteReport& r, const Config& cfg) {
  const auto sphere = geometry::make_chart("sphere2");
  run_group(r, 10, {"geodesic/euler-lagrange-order", "geodesic/first-variation"}, [&] {
    const std::vector<double> steps{0.02, 0.01, 0.005};
    std::vector<double> residuals;
    for (double dt : steps) {
      const auto g = geodesic::classical_geodesic(sphere, v2(kPi / 2, 0.0), v2(0.5, 1.0), 2.0, dt);
      residuals.push_back(geodesic::euler_lagrange_residual(sphere, g, {}).cwiseAbs().maxCoeff());
    }
    double worst_order = 2.0;
    for (std::size_t i = 1; i < residuals.size(); ++i) {
      const double order = std::log(residuals[i - 1] / residuals[i]) / std::log(steps[i - 1] / steps[i]);
      if (std::abs(order - 2.0) >= std::abs(worst_order - 2.0)) worst_order = order;
    }
    const auto g = geodesic::classical_geodesic(sphere, v2(kPi / 2, 0.0), v2(0.5, 1.0), 2.0, 0.01);
    double variation = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s)
      variation = std::max(variation, std::abs(geodesic::first_variation(sphere, g, sine_perturbation(g, cfg.seed(), s))));
    auto order = near("geodesic/euler-lagrange-order", 10, worst_order, 2.0, 0.3);
    order.detail = "dt = 0.02, 0.01, 0.005 on a great circle of sphere2";
    Series s{"residual", steps, residuals, std::vector<double>(steps.size(), kNaN)};
    order.series.push_back(std::move(s));
    auto var = at_most("geodesic/first-variation", 10, variation, 1e-3);
    var.detail = "10 random perturbations vanishing at the endpoints";
    return std::vector<Check>{order, var};
  });

  const std::size_t n = cfg.count("N", 20'000);
  run_group(r, 10, {"geodesic/stochastic-energy"}, [&] {
    const double b = cfg.number("b", 1.5);
    const stochastic::ItoProcessSpec spec{[b](double, const Vec&) -> Vec { return scalar(b); }, 1.0, 1, {}, 0,
                                          "constant"};
    const auto e = stochastic::simulate_ito(spec, scalar(0.0), 1.0, 0.01, n, cfg.seed() + 1);
    meanderiv::EstimatorConfig c = box_1d({}, -20.0, 20.0, 1, std::min<std::size_t>(200, n));
    const auto energy = geodesic::stochastic_energy(e, geometry::make_chart("euclidean:1"), c);
    auto check = near("geodesic/stochastic-energy", 10, energy.energy.value, b * b, 3.0 * energy.energy.standard_error);
    check.detail = "standard error " + std::to_string(energy.energy.standard_error);
    return std::vector<Check>{check};
  });

  run_group(r, 10, {"geodesic/criterion-analytic", "geodesic/criterion-monte-carlo-z"}, [&] {
    const TimeVectorField w = [](double t, const Vec& x) -> Vec { return x / (1.0 + t); };
    stochastic::SimulationOptions options;
    options.initial = [](std::size_t, const NormalStream& s) { return scalar(s(rng_offset::initial_conditions)); };
    const auto e = stochastic::simulate_ito({w, 1.0, 1, {}, 0, "x/(1+t)"}, scalar(0.0), 1.0, 0.01, n,
                                            cfg.seed() + 2, options);
    const auto c = box_1d({{0, e.steps()}}, -4.0, 4.0, 8, std::min<std::size_t>(500, n));
    const std::vector<std::pair<double, Vec>> probes{
        {0.0, scalar(-1.5)}, {0.3, scalar(0.2)}, {0.7, scalar(1.1)}, {1.0, scalar(2.4)}};
    const auto crit = geodesic::stochastic_geodesic_criterion(geometry::make_chart("euclidean:1"), w, e, c, probes);
    auto mc = at_most("geodesic/criterion-monte-carlo-z", 10, crit.pooled_z, 3.0);
    mc.detail = "pooled residual " + std::to_string(crit.pooled[0]) + " +- " + std::to_string(crit.pooled_error[0]);
    return std::vector<Check>{at_most("geodesic/criterion-analytic", 10, crit.analytic_residual, 1e-10), mc};
  });
}

// ---------------------------------------------------------------- whitenoise-cov

void whitenoise_cov(SuiteReport& r, const Config& cfg) {
  run_group(r, 11, {"white-noise/variance", "white-noise/disjoint-z", "white-noise/orthonormal-z"}, [&] {
    whitenoise::SpaceTimeLattice l;
    l.horizon = 1.0;
    l.dt = cfg.number("lattice.dt", 0.1);
    l.half_width = 1.0;
    l.dx = cfg.number("lattice.dx", 0.2);
    l.spatial_dimension = static_cast<int>(cfg.count("lattice.d", 2));
    const std::size_t n = cfg.count("samples", 10'000);
    const std::uint64_t seed = cfg.seed();
    const int d = l.spatial_dimension;

    const auto w = whitenoise::discretize(l, whitenoise::named_test_function("bump(0.5, 0.25)", d));
    const auto var = whitenoise::covariance_check(l, w, w, n, seed);
    auto v = near("white-noise/variance", 11, var.covariance.value / var.expected, 1.0, 0.05);
    v.rule = "|Var(W_w) / |w|^2 - 1| <= tolerance";

    const auto a = whitenoise::named_test_function("indicator(0.0, 0.45)", d);
    const auto b = whitenoise::named_test_function("indicator(0.55, 1.0)", d);
    const auto disjoint = whitenoise::covariance_check(l, whitenoise::discretize(l, a), whitenoise::discretize(l, b),
                                                       n, seed + 1);
    if (disjoint.expected != 0.0) throw ParameterError("disjoint test functions overlap on the lattice");

    // Four normalized cell indicators and two smooth functions orthogonal to them.
    const std::vector<std::size_t> cells{3, l.size() / 3, l.size() / 2, l.size() - 5};
    const double h = 1.0 / std::sqrt(l.cell_volume());
    std::vector<std::vector<double>> family;
    for (std::size_t c : cells) {
      std::vector<double> e(l.size(), 0.0);
      e[c] = h;
      family.push_back(e);
    }
    std::vector<double> even(l.size()), odd(l.size());
    for (std::size_t c = 0; c < l.size(); ++c) {
      const Vec y = l.center(c);
      const bool hole = std::find(cells.begin(), cells.end(), c) != cells.end();
      even[c] = hole ? 0.0 : std::cos(kPi * y[1] / 2.0);
      odd[c] = hole ? 0.0 : std::sin(kPi * y[1]);
    }
    const double overlap = whitenoise::inner_product(l, odd, even) / whitenoise::inner_product(l, even, even);
    for (std::size_t c = 0; c < l.size(); ++c) odd[c] -= overlap * even[c];
    for (auto* f : {&even, &odd}) {
      const double norm = std::sqrt(whitenoise::inner_product(l, *f, *f));
      for (double& x : *f) x /= norm;
      family.push_back(*f);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < family.size(); ++i)
      for (std::size_t j = i; j < family.size(); ++j) {
        const auto c = whitenoise::covariance_check(l, family[i], family[j], n, seed + 100 + i * family.size() + j);
        worst = std::max(worst, std::abs(c.z));
      }
    auto o = at_most("white-noise/orthonormal-z", 11, worst, 3.0);
    o.detail = std::to_string(family.size()) + " functions, " + std::to_string(n) + " samples, d = " +
               std::to_string(d);
    return std::vector<Check>{v, at_most("white-noise/disjoint-z", 11, std::abs(disjoint.z), 3.0), o};
  });
}

// ---------------------------------------------------------------- dirac-algebra

void dirac_algebra(SuiteReport& r, const Config& cfg) {
  run_group(r, 12, {"dirac/anticommutators", "dirac/gamma5", "dirac/clifford-relation", "dirac/klein-gordon",
                    "dirac/plane-wave", "dirac/dalembertian-order"},
            [&] {
              const auto g = dirac::build_gammas();
              const dirac::Matrix4 product = dirac::Complex(0, 1) * g.gamma[0] * g.gamma[1] * g.gamma[2] * g.gamma[3];
              const double g5 = std::max(dirac::chirality_defect(g), (product - g.gamma5).cwiseAbs().maxCoeff());
              const NormalStream rng(cfg.seed(), 0);
              double clifford = 0.0, kg = 0.0, plane = 0.0;
              if (dirac::clifford_sign(g) != 1) throw ConventionError("unexpected Clifford sign");
              for (std::uint64_t s = 0; s < 10; ++s) {
                const dirac::Vector4 a(rng(8 * s), rng(8 * s + 1), rng(8 * s + 2), rng(8 * s + 3));
                const dirac::Vector4 b(rng(8 * s + 4), rng(8 * s + 5), rng(8 * s + 6), rng(8 * s + 7));
                clifford = std::max(clifford, dirac::clifford_relation_check(a, b, g));
                const double m = 0.2 + std::abs(b[0]);
                const auto wave = dirac::dirac_plane_wave(a.tail<3>(), m, g);
                if (wave.null_space.cols() != 2) throw ConventionError("plane-wave null space is not 2-dimensional");
                kg = std::max(kg, dirac::klein_gordon_residual(wave.p, m));
                for (int c = 0; c < 2; ++c)
                  plane = std::max(plane, dirac::dirac_residual(wave.p, m, wave.null_space.col(c), g));
              }
              // D² on f c against □f c over three grids.
              const dirac::Spinor spinor(1.0, -0.5, dirac::Complex(0, 0.25), 2.0);
              // f = cos(t + x + y) + sin z, so □f = f.
              const auto f = [](const dirac::Vector4& x) { return std::cos(x[0] + x[1] + x[2]) + std::sin(x[3]); };
              std::vector<double> hs, errors;
              for (int n : {16, 24, 32}) {
                const std::array<int, 4> shape{n, n, n, n};
                const dirac::Vector4 h = dirac::Vector4::Constant(2 * kPi / n);
                const auto psi = dirac::sample_spinor([&](const dirac::Vector4& x) -> dirac::Spinor { return f(x) * spinor; },
                                                      shape, dirac::Vector4::Zero(), h);
                const auto twice = dirac::dirac_operator_fd(dirac::dirac_operator_fd(psi, g), g);
                double err = 0.0;
                for (std::size_t i = 0; i < twice.values.size(); ++i)
                  err = std::max(err, (twice.values[i] - f(psi.node(i)) * spinor).cwiseAbs().maxCoeff());
                hs.push_back(h[0]);
                errors.push_back(err);
              }
              double worst_order = 2.0;
              for (std::size_t i = 1; i < errors.size(); ++i) {
                const double order = std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]);
                if (std::abs(order - 2.0) >= std::abs(worst_order - 2.0)) worst_order = order;
              }
              auto order = near("dirac/dalembertian-order", 12, worst_order, 2.0, 0.3);
              order.series.push_back({"error", hs, errors, std::vector<double>(hs.size(), kNaN)});
              return std::vector<Check>{at_most("dirac/anticommutators", 12, dirac::anticommutator_defect(g), 1e-15),
                                        at_most("dirac/gamma5", 12, g5, 1e-15),
                                        at_most("dirac/clifford-relation", 12, clifford, 1e-12),
                                        at_most("dirac/klein-gordon", 12, kg, 1e-12),
                                        at_most("dirac/plane-wave", 12, plane, 1e-12), order};
            });
}

using SuiteFn = void (*)(SuiteReport&, const Config&);

const std::map<std::string, SuiteFn>& registry() {
  static const std::map<std::string, SuiteFn> suites{
      {"sphere-geometry", sphere_geometry}, {"nelson-ho", nelson_ho},
      {"wiener-meanderiv", wiener_meanderiv}, {"fractal-dim", fractal_dim},
      {"feynman-kac", feynman_kac},         {"geodesic-variational", geodesic_variational},
      {"whitenoise-cov", whitenoise_cov},   {"dirac-algebra", dirac_algebra}};
  return suites;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

double json_number(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : kNaN; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string file_token(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

}  // namespace

// ---------------------------------------------------------------- Config

Config::Config(nlohmann::json data) : data_(std::move(data)) {
  if (!data_.is_object()) throw ConfigError("configuration must be a JSON object");
}

Config Config::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  try {
    return Config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

const nlohmann::json* Config::find(std::string_view key) const {
  const nlohmann::json* node = &data_;
  for (const auto& part : split_key(key)) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &node->at(part);
  }
  return node;
}

bool Config::has(std::string_view key) const { return find(key) != nullptr; }

double Config::number(std::string_view key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError("config key '" + std::string(key) + "' must be a number");
  return v->get<double>();
}

std::size_t Config::count(std::string_view key, std::size_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (v->is_number_unsigned()) return v->get<std::size_t>();
  if (v->is_number_integer() && v->get<long long>() >= 0) return static_cast<std::size_t>(v->get<long long>());
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1e18) return static_cast<std::size_t>(d);
  }
  throw ConfigError("config key '" + std::string(key) + "' must be a non-negative integer");
}

std::uint64_t Config::seed(std::uint64_t fallback) const { return count("seed", fallback); }

std::string Config::text(std::string_view key, std::string_view fallback) const {
  const auto* v = find(key);
  if (!v) return std::string(fallback);
  if (!v->is_string()) throw ConfigError("config key '" + std::string(key) + "' must be a string");
  return v->get<std::string>();
}

std::vector<double> Config::numbers(std::string_view key, const std::vector<double>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (v->is_number()) return {v->get<double>()};
  if (!v->is_array()) throw ConfigError("config key '" + std::string(key) + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw ConfigError("config key '" + std::string(key) + "' must be a list of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void Config::set(std::string_view key, std::string_view value) {
  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = std::string(value);
  nlohmann::json* node = &data_;
  const auto parts = split_key(key);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    nlohmann::json& next = (*node)[parts[i]];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) throw ConfigError("config key '" + parts[i] + "' is not a section");
    node = &next;
  }
  (*node)[parts.back()] = std::move(parsed);
}

void Config::apply_override(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

// ---------------------------------------------------------------- reports

bool SuiteReport::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json j{{"name", c.name},           {"criterion", c.criterion}, {"value", c.value},
                     {"target", c.target},       {"tolerance", c.tolerance}, {"rule", c.rule},
                     {"pass", c.pass},           {"detail", c.detail}};
    if (!c.series.empty()) {
      nlohmann::json series = nlohmann::json::array();
      for (const auto& s : c.series)
        series.push_back({{"name", s.name}, {"x", s.x}, {"value", s.value}, {"stderr", s.standard_error}});
      j["series"] = series;
    }
    list.push_back(j);
  }
  return {{"suite", suite}, {"config", config}, {"pass", pass()}, {"checks", list}};
}

std::string SuiteReport::table() const {
  std::ostringstream out;
  out << "suite " << suite << (pass() ? ": PASS" : ": FAIL") << "\n";
  std::size_t width = 5;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  out << std::left << std::setw(static_cast<int>(width)) << "check" << "  crit  " << std::setw(12) << "value"
      << std::setw(12) << "target" << std::setw(12) << "tolerance" << "status  seconds\n";
  for (const auto& c : checks) {
    out << std::left << std::setw(static_cast<int>(width)) << c.name << "  " << std::setw(4) << c.criterion << "  "
        << std::setw(12) << format_number(c.value) << std::setw(12) << format_number(c.target) << std::setw(12)
        << format_number(c.tolerance) << std::setw(8) << (c.pass ? "pass" : "FAIL") << std::fixed
        << std::setprecision(2) << c.runtime_seconds << std::defaultfloat << "\n";
    if (!c.detail.empty()) out << "    " << c.detail << "\n";
  }
  out << "runtime " << std::fixed << std::setprecision(2) << runtime_seconds << " s\n";
  return out.str();
}

std::vector<std::string> suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

SuiteReport run_suite(std::string_view name, const Config& config) {
  const auto it = registry().find(std::string(name));
  if (it == registry().end()) {
    std::string known;
    for (const auto& n : suite_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown suite '" + std::string(name) + "' (available: " + known + ")");
  }
  SuiteReport report;
  report.suite = it->first;
  report.config = config.json();
  const auto start = Clock::now();
  it->second(report, config);
  report.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

Check check_from_json(const nlohmann::json& j) {
  Check c;
  try {
    c.name = j.at("name").get<std::string>();
    c.criterion = j.value("criterion", 0);
    c.value = json_number(j.value("value", nlohmann::json()));
    c.target = json_number(j.value("target", nlohmann::json()));
    c.tolerance = json_number(j.value("tolerance", nlohmann::json()));
    c.rule = j.value("rule", std::string());
    c.pass = j.at("pass").get<bool>();
    c.detail = j.value("detail", std::string());
    if (j.contains("series"))
      for (const auto& s : j.at("series")) {
        Series out{s.at("name").get<std::string>(), {}, {}, {}};
        for (const auto& v : s.at("x")) out.x.push_back(json_number(v));
        for (const auto& v : s.at("value")) out.value.push_back(json_number(v));
        for (const auto& v : s.at("stderr")) out.standard_error.push_back(json_number(v));
        c.series.push_back(std::move(out));
      }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed check: ") + e.what());
  }
  return c;
}

MergedReport merge_reports(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) throw ConfigError(directory.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  MergedReport merged;
  std::map<std::pair<std::string, std::string>, std::string> seen;
  for (const auto& file : files) {
    std::ifstream in(file);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("suite") || !j.contains("checks")) continue;
    const std::string suite = j.at("suite").get<std::string>();
    for (const auto& cj : j.at("checks")) {
      Check c = check_from_json(cj);
      const auto key = std::make_pair(suite, c.name);
      if (const auto it = seen.find(key); it != seen.end())
        throw ConfigError("check '" + suite + "/" + c.name + "' appears in both " + it->second + " and " +
                          file.string());
      seen[key] = file.string();
      merged.rows.push_back({suite, std::move(c), file.filename().string()});
    }
  }
  if (merged.rows.empty()) throw ConfigError("no suite reports found in " + directory.string());
  std::stable_sort(merged.rows.begin(), merged.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.suite, a.check.name) < std::tie(b.suite, b.check.name);
  });
  return merged;
}

void write_merged(const MergedReport& merged, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  std::ofstream summary(out / "summary.csv");
  if (!summary) throw ResourceError("cannot write " + (out / "summary.csv").string());
  summary << "suite,check,criterion,value,target,tolerance,pass,source\n" << std::setprecision(17);
  for (const auto& row : merged.rows) {
    const auto& c = row.check;
    summary << csv_field(row.suite) << ',' << csv_field(c.name) << ',' << c.criterion << ',' << c.value << ','
            << c.target << ',' << c.tolerance << ',' << (c.pass ? "true" : "false") << ',' << csv_field(row.source)
            << '\n';
    for (const auto& s : c.series) {
      const auto file = out / ("plot_" + file_token(row.suite) + "_" + file_token(c.name) + "_" + file_token(s.name) +
                               ".csv");
      std::ofstream plot(file);
      if (!plot) throw ResourceError("cannot write " + file.string());
      plot << "x,value,stderr\n" << std::setprecision(17);
      for (std::size_t i = 0; i < s.x.size(); ++i)
        plot << s.x[i] << ',' << s.value[i] << ',' << (i < s.standard_error.size() ? s.standard_error[i] : kNaN)
             << '\n';
    }
  }
}

}  // namespace fractoid::suites
