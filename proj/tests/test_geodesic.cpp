#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fractoid/error.hpp"
#include "fractoid/geodesic.hpp"

using namespace fractoid;
using namespace fractoid::geodesic;
using geometry::make_chart;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

// Σ_m c_m sin(mπt/T) per component, coefficients from one normal stream.
Mat random_perturbation(const PathCurve& curve, std::uint64_t stream, double amplitude) {
  const NormalStream rng(99, stream);
  const auto rows = curve.points.rows(), cols = curve.points.cols();
  const double T = curve.dt * static_cast<double>(rows - 1);
  Mat p = Mat::Zero(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (int m = 1; m <= 3; ++m) {
      const double c = amplitude * rng(static_cast<std::uint64_t>(j * 3 + m));
      for (Eigen::Index k = 1; k + 1 < rows; ++k)
        p(k, j) += c * std::sin(m * M_PI * static_cast<double>(k) * curve.dt / T);
    }
  return p;
}

meanderiv::EstimatorConfig box_config(std::vector<meanderiv::TimeWindow> windows, const Vec& lo, const Vec& hi,
                                      std::vector<int> cells, std::size_t min_count) {
  meanderiv::EstimatorConfig c;
  c.grid.windows = std::move(windows);
  c.grid.lower = lo;
  c.grid.upper = hi;
  c.grid.cells = std::move(cells);
  c.min_count = min_count;
  return c;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("energy functional on flat and spherical curves") {
  const auto flat = make_chart("euclidean:1");
  const auto line = sample_curve([](double t) { return scalar(t); }, 1.0, 100);
  CHECK(energy_functional(flat, line) == doctest::Approx(1.0).epsilon(1e-12));

  const auto square = sample_curve([](double t) { return scalar(t * t); }, 1.0, 100);
  CHECK(std::abs(energy_functional(flat, square) - 4.0 / 3.0) < 1e-3);
  CHECK(energy_functional(flat, square) > energy_functional(flat, line));

  const auto sphere = make_chart("sphere2");
  const auto quarter = sample_curve([](double t) { return v2(M_PI / 2, M_PI / 2 * t); }, 1.0, 200);
  CHECK(std::abs(energy_functional(sphere, quarter) - M_PI * M_PI / 4) < 1e-4);

  // An inclined great circle, reversed in time.
  const auto arc = classical_geodesic(sphere, v2(M_PI / 2, 0.0), v2(0.4, 1.0), 2.0, 0.01);
  PathCurve reversed = arc;
  reversed.points = arc.points.colwise().reverse();
  CHECK(std::abs(energy_functional(sphere, arc) - energy_functional(sphere, reversed)) < 1e-12);

  PathCurve outside = quarter;
  outside.points(3, 0) = 0.0;
  CHECK_THROWS_AS(energy_functional(sphere, outside), DomainError);
  PathCurve short_curve = line;
  short_curve.points.conservativeResize(2, 1);
  CHECK_THROWS_AS(energy_functional(flat, short_curve), ParameterError);
}

TEST_CASE("classical geodesics") {
  const auto flat = make_chart("euclidean:2");
  const auto line = classical_geodesic(flat, v2(0.5, -1.0), v2(1.0, 2.0), 3.0, 0.01);
  REQUIRE(line.points.rows() == 301);
  double deviation = 0.0;
  for (Eigen::Index k = 0; k < line.points.rows(); ++k) {
    const Vec expect = v2(0.5, -1.0) + 0.01 * static_cast<double>(k) * v2(1.0, 2.0);
    deviation = std::max(deviation, (line.points.row(k).transpose() - expect).norm());
  }
  CHECK(deviation <= 1e-10);
  CHECK(line.warnings.empty());

  const auto sphere = make_chart("sphere2");
  const auto meridian = classical_geodesic(sphere, v2(M_PI / 2, 0.3), v2(-1.0, 0.0), 1.2, 0.001);
  CHECK((meridian.points.col(1).array() - 0.3).abs().maxCoeff() <= 1e-8);
  CHECK(meridian.points(meridian.points.rows() - 1, 0) == doctest::Approx(M_PI / 2 - 1.2).epsilon(1e-9));

  const auto circle = classical_geodesic(sphere, v2(M_PI / 2, 0.0), v2(0.5, 1.0), 10.0, 0.01);
  REQUIRE(circle.points.rows() == 1001);
  const double speed0 = 0.25 + 1.0;
  double drift = 0.0;
  for (Eigen::Index k = 0; k < circle.points.rows(); ++k) {
    const Vec v = circle.tangent.row(k).transpose();
    drift = std::max(drift, std::abs(v.dot(sphere.metric(circle.points.row(k).transpose()) * v) - speed0));
  }
  CHECK(drift <= 1e-8);

  // Heading north for T = 3 reaches the polar cap, outside the chart.
  const auto truncated = classical_geodesic(sphere, v2(M_PI / 2, 0.0), v2(-1.0, 0.0), 3.0, 0.01);
  CHECK(truncated.points.rows() < 301);
  CHECK(truncated.points.rows() == truncated.tangent.rows());
  REQUIRE(truncated.warnings.size() == 1);
  CHECK(truncated.warnings[0].find("truncated") != std::string::npos);
  CHECK_THROWS_AS(classical_geodesic(sphere, v2(0.0, 0.0), v2(1.0, 0.0), 1.0, 0.01), DomainError);
}

TEST_CASE("Euler-Lagrange residuals") {
  const auto flat = make_chart("euclidean:1");
  const LagrangianSpec free;
  const auto line = sample_curve([](double t) { return scalar(2.0 - 3.0 * t); }, 1.0, 50);
  CHECK(max_abs(euler_lagrange_residual(flat, line, free)) <= 1e-8);

  LagrangianSpec harmonic;
  harmonic.potential = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  double previous = 0.0;
  for (std::size_t steps : {100, 200, 400}) {
    const auto c = sample_curve([](double t) { return scalar(std::cos(t)); }, 2.0, steps);
    const double r = max_abs(euler_lagrange_residual(flat, c, harmonic));
    if (previous > 0.0) CHECK(previous / r == doctest::Approx(4.0).epsilon(0.05));
    previous = r;
  }

  const auto cubic = sample_curve([](double t) { return scalar(t * t * t); }, 1.0, 100);
  const Mat r = euler_lagrange_residual(flat, cubic, free);
  CHECK(std::abs(r(50 - 2, 0)) >= 1.0);
  CHECK(r(50 - 2, 0) == doctest::Approx(3.0).epsilon(1e-6));

  // Spherical geodesics: the discretization error halves twice per halving of dt.
  const auto sphere = make_chart("sphere2");
  std::vector<double> residuals, steps{0.02, 0.01, 0.005};
  for (double dt : steps) {
    const auto g = classical_geodesic(sphere, v2(M_PI / 2, 0.0), v2(0.5, 1.0), 2.0, dt);
    residuals.push_back(max_abs(euler_lagrange_residual(sphere, g, free)));
  }
  for (std::size_t i = 1; i < residuals.size(); ++i) {
    const double order = std::log(residuals[i - 1] / residuals[i]) / std::log(steps[i - 1] / steps[i]);
    CHECK(std::abs(order - 2.0) <= 0.3);
  }

  PathCurve tiny = sample_curve([](double t) { return scalar(t); }, 1.0, 3);
  CHECK_THROWS_AS(euler_lagrange_residual(flat, tiny, free), ParameterError);
  LagrangianSpec massless;
  massless.mass = 0.0;
  CHECK_THROWS_AS(euler_lagrange_residual(flat, line, massless), ParameterError);
}

TEST_CASE("first variation with fixed endpoints") {
  const auto sphere = make_chart("sphere2");
  const auto g = classical_geodesic(sphere, v2(M_PI / 2, 0.0), v2(0.5, 1.0), 2.0, 0.01);
  for (std::uint64_t s = 0; s < 10; ++s)
    CHECK(std::abs(first_variation(sphere, g, random_perturbation(g, s, 0.1))) <= 1e-3);

  const auto flat1 = make_chart("euclidean:1");
  const auto line = sample_curve([](double t) { return scalar(1.0 + 2.0 * t); }, 1.0, 100);
  Mat wave = Mat::Zero(101, 1);
  for (int k = 0; k <= 100; ++k) wave(k, 0) = std::sin(M_PI * k / 100.0);
  CHECK(std::abs(first_variation(flat1, line, wave)) <= 1e-8);

  // Quarter unit circle with a radial bump: dE/dε = 2 θ'² ∫ sin(πt) dt = π.
  const auto flat2 = make_chart("euclidean:2");
  const auto arc = sample_curve([](double t) { return v2(std::cos(M_PI / 2 * t), std::sin(M_PI / 2 * t)); }, 1.0, 400);
  Mat radial = Mat::Zero(401, 2);
  for (int k = 0; k <= 400; ++k) radial.row(k) = std::sin(M_PI * k / 400.0) * arc.points.row(k);
  const double dE = first_variation(flat2, arc, radial);
  CHECK(std::abs(dE) >= 0.1);
  CHECK(dE == doctest::Approx(M_PI).epsilon(1e-3));

  Mat loose = wave;
  loose(100, 0) = 1e-3;
  CHECK_THROWS_AS(first_variation(flat1, line, loose), ParameterError);
  CHECK_THROWS_AS(first_variation(flat1, line, Mat::Zero(50, 1)), ParameterError);

  // The straight line beats every perturbed curve with the same endpoints.
  const auto straight = sample_curve([](double t) { return v2(t, -t); }, 1.0, 100);
  const double e0 = energy_functional(flat2, straight);
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    PathCurve other = straight;
    other.points += random_perturbation(straight, 1000 + s, 0.05);
    if (energy_functional(flat2, other) > e0 + 1e-12) ++wins;
  }
  CHECK(wins == 100);
}

TEST_CASE("curves round-trip through the ensemble CSV format") {
  const auto sphere = make_chart("sphere2");
  const auto g = classical_geodesic(sphere, v2(1.2, 0.3), v2(0.2, 0.7), 1.0, 0.05);
  const auto file = std::filesystem::temp_directory_path() / "fractoid_curve.csv";
  stochastic::write_csv(to_ensemble(g), file);
  const auto back = from_ensemble(stochastic::read_csv(file));
  std::filesystem::remove(file);
  CHECK(back.dt == doctest::Approx(g.dt));
  CHECK((back.points - g.points).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(energy_functional(sphere, back) == doctest::Approx(energy_functional(sphere, g)).epsilon(1e-12));
}

TEST_CASE("stochastic energy") {
  const auto flat = make_chart("euclidean:1");

  SUBCASE("deterministic ensemble matches the path energy") {
    const stochastic::ItoProcessSpec spec{[](double t, const Vec&) -> Vec { return scalar(std::cos(t)); }, 0.0, 1,
                                          {}, 0, "cos"};
    const auto e = stochastic::simulate_ito(spec, scalar(0.0), 1.0, 0.001, 200, 5);
    const auto config = box_config({}, scalar(-5.0), scalar(5.0), {1}, 200);
    const auto energy = stochastic_energy(e, flat, config);
    const double expected = energy_functional(flat, from_ensemble(e));
    CHECK(energy.energy.standard_error == 0.0);
    CHECK(std::abs(energy.energy.value - expected) < 1e-3);
    CHECK(energy.dropped_samples == 0);
  }

  SUBCASE("constant drift gives |b|² T") {
    const stochastic::ItoProcessSpec spec{[](double, const Vec&) -> Vec { return scalar(1.5); }, 1.0, 1, {}, 0,
                                          "constant"};
    const auto e = stochastic::simulate_ito(spec, scalar(0.0), 1.0, 0.01, 20000, 11);
    const auto config = box_config({}, scalar(-20.0), scalar(20.0), {1}, 200);
    const TimeVectorField b = [](double, const Vec&) -> Vec { return scalar(1.5); };
    const auto full = stochastic_energy(e, flat, config, b);
    CHECK(std::abs(full.energy.value - 2.25) <= 3.0 * full.energy.standard_error);
    CHECK(full.energy.standard_error < 0.1);
    CHECK(full.plug_in.value == doctest::Approx(2.25).epsilon(1e-12));

    const auto first = stochastic_energy(e, flat, config, 0, 50);
    const auto second = stochastic_energy(e, flat, config, 50, 100);
    const double combined = std::hypot(first.energy.standard_error, second.energy.standard_error);
    CHECK(std::abs(first.energy.value + second.energy.value - full.energy.value) <= combined);

    // Jensen: E ∫ |D|² ≥ |E[x_T − x_0]|² / T.
    double mean_displacement = 0.0;
    for (std::size_t i = 0; i < e.paths(); ++i) mean_displacement += e.at(i, e.steps(), 0) - e.at(i, 0, 0);
    mean_displacement /= static_cast<double>(e.paths());
    CHECK(full.energy.value >= mean_displacement * mean_displacement - 3.0 * full.energy.standard_error);

    CHECK_THROWS_AS(stochastic_energy(e, flat, config, 60, 60), ParameterError);
    CHECK_THROWS_AS(stochastic_energy(e, flat, config, 0, 101), ParameterError);
    CHECK_THROWS_AS(stochastic_energy(e, make_chart("euclidean:2"), config), ParameterError);
  }
}

TEST_CASE("stochastic geodesic criterion") {
  const auto flat = make_chart("euclidean:1");
  stochastic::SimulationOptions options;
  options.initial = [](std::size_t, const NormalStream& s) { return scalar(s(rng_offset::initial_conditions)); };
  const std::vector<std::pair<double, Vec>> probes{
      {0.0, scalar(-1.5)}, {0.3, scalar(0.2)}, {0.7, scalar(1.1)}, {1.0, scalar(2.4)}};

  const auto run = [&](const TimeVectorField& w, std::uint64_t seed) {
    const stochastic::ItoProcessSpec spec{w, 1.0, 1, {}, 0, "w"};
    const auto e = stochastic::simulate_ito(spec, scalar(0.0), 1.0, 0.01, 20000, seed, options);
    const auto config = box_config({{0, e.steps()}}, scalar(-4.0), scalar(4.0), {8}, 500);
    return stochastic_geodesic_criterion(flat, w, e, config, probes);
  };

  const auto zero = run([](double, const Vec&) -> Vec { return scalar(0.0); }, 1);
  CHECK(zero.analytic_residual == 0.0);
  CHECK(zero.pooled[0] == 0.0);
  CHECK(zero.pooled_z == 0.0);

  const auto constant = run([](double, const Vec&) -> Vec { return scalar(0.7); }, 2);
  CHECK(constant.analytic_residual <= 1e-12);
  CHECK(constant.pooled_z <= 3.0);

  const auto hyperbolic = run([](double t, const Vec& x) -> Vec { return x / (1.0 + t); }, 3);
  CHECK(hyperbolic.analytic_residual <= 1e-10);
  CHECK(hyperbolic.pooled_z <= 3.0);
  CHECK(hyperbolic.monte_carlo.populated_count() >= 4);

  // A drift that is not a stochastic geodesic: w = x gives ∂_t w + w w' = x.
  const auto linear = run([](double, const Vec& x) -> Vec { return x; }, 4);
  CHECK(linear.analytic_residual >= 2.0);
  CHECK(linear.pooled_z + linear.max_bin_z > 3.0);
}
