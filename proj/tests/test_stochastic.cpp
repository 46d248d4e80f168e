#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fractoid/error.hpp"
#include "fractoid/stats.hpp"
#include "fractoid/stochastic.hpp"
#include "oracles/oracles.hpp"

using namespace fractoid;
using namespace fractoid::stochastic;

namespace {

Vec scalar(double v) {
  Vec x(1);
  x << v;
  return x;
}

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

ItoProcessSpec wiener(int d, double eps = 1.0) {
  return {[d](double, const Vec&) -> Vec { return Vec::Zero(d); }, eps, d, {}, 0, "zero"};
}

std::vector<double> endpoint(const PathEnsemble& e, int j) {
  std::vector<double> out(e.paths());
  for (std::size_t i = 0; i < e.paths(); ++i) out[i] = e.at(i, e.steps(), j);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fractoid_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("wiener increments: determinism and moments") {
  CHECK(wiener_increments(100, 0.01, 2, 42, 7) == wiener_increments(100, 0.01, 2, 42, 7));
  CHECK(wiener_increments(100, 0.01, 2, 42, 7) != wiener_increments(100, 0.01, 2, 42, 8));
  const auto inc = wiener_increments(1'000'000, 0.01, 1, 5, 0);
  stats::RunningStats s;
  for (double v : inc) s.add(v);
  CHECK(std::abs(s.mean()) <= 3.0 * std::sqrt(0.01 / 1e6));
  CHECK(std::abs(s.variance() / 0.01 - 1.0) < 0.01);
  CHECK_THROWS_AS(wiener_increments(10, 0.0, 1, 1, 1), ParameterError);
}

TEST_CASE("euler-maruyama deterministic limit") {
  const ItoProcessSpec spec{[](double, const Vec&) -> Vec { return scalar(1.0); }, 0.0, 1, {}, 0, "one"};
  const auto e = simulate_ito(spec, scalar(0.0), 1.0, 0.01, 5, 1);
  for (std::size_t i = 0; i < e.paths(); ++i) CHECK(e.at(i, e.steps(), 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("path i is the running sum of its own increment stream") {
  const auto e = simulate_ito(wiener(2), v2(0, 0), 0.5, 0.01, 4, 99);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto inc = wiener_increments(e.steps(), 0.01, 2, 99, i);
    double x0 = 0.0, x1 = 0.0;
    for (std::size_t k = 0; k < e.steps(); ++k) {
      x0 += inc[2 * k];
      x1 += inc[2 * k + 1];
      REQUIRE(e.at(i, k + 1, 0) == x0);
      REQUIRE(e.at(i, k + 1, 1) == x1);
    }
  }
}

TEST_CASE("wiener variance and quadratic variation") {
  const auto e = simulate_ito(wiener(1), scalar(0.0), 1.0, 0.01, 100'000, 3);
  const auto end = endpoint(e, 0);
  const double var = stats::variance(end);
  const double se = std::sqrt(2.0 / (end.size() - 1));
  CHECK(std::abs(var - 1.0) < 3.0 * se);

  const auto one = simulate_ito(wiener(1), scalar(0.0), 1.0, 1.0 / 200'000, 1, 11);
  double qv = 0.0;
  for (std::size_t k = 0; k < one.steps(); ++k) {
    const double d = one.at(0, k + 1, 0) - one.at(0, k, 0);
    qv += d * d;
  }
  CHECK(std::abs(qv - 1.0) < 0.01);
}

TEST_CASE("simulation is identical for any worker count") {
  const ItoProcessSpec ou{[](double, const Vec& x) -> Vec { return -x; }, 0.7, 2, {}, 0, "ou"};
  setenv("FRACTOID_THREADS", "1", 1);
  const auto a = simulate_ito(ou, v2(1, -1), 1.0, 0.01, 700, 5);
  setenv("FRACTOID_THREADS", "3", 1);
  const auto b = simulate_ito(ou, v2(1, -1), 1.0, 0.01, 700, 5);
  unsetenv("FRACTOID_THREADS");
  CHECK(a.data() == b.data());
}

TEST_CASE("simulation errors") {
  const ItoProcessSpec blowup{[](double, const Vec& x) -> Vec { return scalar(x[0] > 0.5 ? NAN : 1.0); }, 0.0, 1, {}, 0, ""};
  try {
    simulate_ito(blowup, scalar(0.0), 1.0, 0.1, 1, 1);
    FAIL("expected a simulation error");
  } catch (const SimulationError& e) {
    CHECK(std::string(e.what()).find("path 0") != std::string::npos);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  CHECK_THROWS_AS(simulate_ito(wiener(1), scalar(0.0), 1.0, -0.1, 1, 1), ParameterError);
  CHECK_THROWS_AS(simulate_ito(wiener(1), scalar(0.0), 1.0, 0.1, 0, 1), ParameterError);
}

TEST_CASE("stratonovich integration") {
  const TimeVectorField zero = [](double, const Vec&) -> Vec { return scalar(0.0); };
  const TimeMatrixField linear = [](double, const Vec& x) -> Mat { return Mat::Constant(1, 1, x[0]); };
  SUBCASE("noise-free limit matches Euler") {
    const TimeVectorField f = [](double t, const Vec& x) -> Vec { return scalar(t - x[0]); };
    const StratonovichSpec s{f, [](double, const Vec&) -> Mat { return Mat::Zero(1, 1); }, 1, 1, ""};
    const auto h = simulate_stratonovich(s, scalar(1.0), 1.0, 1e-3, 1, 1);
    const auto e = simulate_ito({f, 0.0, 1, {}, 0, ""}, scalar(1.0), 1.0, 1e-3, 1, 1);
    CHECK(std::abs(h.at(0, h.steps(), 0) - e.at(0, e.steps(), 0)) < 1e-3);
  }
  SUBCASE("geometric Brownian motion in both conventions") {
    const StratonovichSpec s{zero, linear, 1, 1, "gbm"};
    const auto strat = simulate_stratonovich(s, scalar(1.0), 1.0, 1e-3, 20'000, 8);
    stats::RunningStats logs, values;
    for (double v : endpoint(strat, 0)) {
      logs.add(std::log(v));
      values.add(v);
    }
    CHECK(std::abs(logs.mean()) < 3.0 * logs.standard_error() + 2e-3);
    CHECK(std::abs(values.mean() - std::exp(0.5)) < 3.0 * values.standard_error());
    ItoProcessSpec ito{zero, 0.0, 1, linear, 1, "gbm"};
    stats::RunningStats ito_values;
    for (double v : endpoint(simulate_ito(ito, scalar(1.0), 1.0, 1e-3, 20'000, 8), 0)) ito_values.add(v);
    CHECK(std::abs(ito_values.mean() - 1.0) < 3.0 * ito_values.standard_error());
  }
  SUBCASE("chain rule: Y = exp(X) with dX = ∘dW solves dY = Y ∘ dW") {
    const StratonovichSpec x{zero, [](double, const Vec&) -> Mat { return Mat::Ones(1, 1); }, 1, 1, ""};
    const StratonovichSpec y{zero, linear, 1, 1, ""};
    const auto ex = simulate_stratonovich(x, scalar(0.0), 1.0, 1e-3, 20'000, 21);
    const auto ey = simulate_stratonovich(y, scalar(1.0), 1.0, 1e-3, 20'000, 21);
    stats::RunningStats via_x, direct;
    for (double v : endpoint(ex, 0)) via_x.add(std::exp(v));
    for (double v : endpoint(ey, 0)) direct.add(v);
    CHECK(std::abs(via_x.mean() - direct.mean()) <
          3.0 * std::hypot(via_x.standard_error(), direct.standard_error()) + 1e-2);
  }
}

TEST_CASE("manifold diffusion on a flat chart matches Euler-Maruyama in law") {
  const auto chart = geometry::make_chart("euclidean:2");
  const auto m = simulate_manifold_diffusion(chart, {}, v2(0, 0), 1.0, 0.01, 10'000, 17, 1.0);
  const auto e = simulate_ito(wiener(2), v2(0, 0), 1.0, 0.01, 10'000, 1017);
  for (int j = 0; j < 2; ++j) CHECK(stats::ks_two_sample(endpoint(m, j), endpoint(e, j)).p_value > 0.01);
}

TEST_CASE("sphere brownian motion reaches the uniform law") {
  const auto sphere = geometry::make_chart("sphere2");
  const auto e = simulate_manifold_diffusion(sphere, {}, v2(1.0, 0.0), 10.0, 0.02, 10'000, 23, 1.0);
  std::vector<double> c;
  for (double th : endpoint(e, 0)) c.push_back(std::cos(th));
  CHECK(stats::ks_uniform(c, -1.0, 1.0).statistic <= 0.02);
}

TEST_CASE("one-step generator matches half the Laplace-Beltrami operator") {
  const auto sphere = geometry::make_chart("sphere2");
  const double dt = 1e-3;
  const auto e = simulate_manifold_diffusion(sphere, {}, v2(1.0, 0.0), dt, dt, 200'000, 31, 1.0);
  stats::RunningStats s;
  for (double th : endpoint(e, 0)) s.add((std::cos(th) - std::cos(1.0)) / dt);
  const double target = 0.5 * geometry::laplace_beltrami(sphere, [](const Vec& p) { return std::cos(p[0]); }, v2(1.0, 0.0));
  CHECK(std::abs(s.mean() - target) < 3.0 * s.standard_error() + 0.05);
}

TEST_CASE("boundary rejection is loud when retries are exhausted") {
  const geometry::MetricChart narrow("slab", 1, {1, 0}, [](const Vec&) -> Mat { return Mat::Identity(1, 1); },
                                     [](const Vec& x) { return std::abs(x[0]) < 1e-9; });
  CHECK_THROWS_AS(simulate_manifold_diffusion(narrow, {}, scalar(0.0), 1.0, 0.1, 1, 1, 1.0), BoundaryError);
}

TEST_CASE("parallel transport") {
  SUBCASE("flat chart keeps the vector") {
    const auto chart = geometry::make_chart("euclidean:2");
    Mat path(3, 2);
    path << 0, 0, 1, 2, -1, 5;
    for (const Vec& v : parallel_transport(chart, path, v2(0.3, -0.4))) CHECK((v - v2(0.3, -0.4)).norm() == 0.0);
  }
  SUBCASE("latitude holonomy") {
    const auto sphere = geometry::make_chart("sphere2");
    const double theta0 = std::numbers::pi / 3;
    const int steps = 10'000;
    Mat path(steps + 1, 2);
    for (int k = 0; k <= steps; ++k) path.row(k) << theta0, 2.0 * std::numbers::pi * k / steps;
    const Vec v0 = v2(1.0, 0.0);
    const auto v = parallel_transport(sphere, path, v0);
    const double angle = rotation_angle(sphere, path.row(steps).transpose(), v0, v.back());
    CHECK(std::abs(angle - 2.0 * std::numbers::pi * (1.0 - std::cos(theta0))) < 1e-3);
    const Vec fine = oracle::sphere_latitude_transport(theta0, v0, 100'000);
    CHECK((v.back() - fine).norm() < 1e-3);
    double drift = 0.0;
    for (int k = 0; k <= steps; ++k) {
      const Vec x = path.row(k).transpose();
      drift = std::max(drift, std::abs(v[k].dot(sphere.metric(x) * v[k]) - 1.0));
    }
    CHECK(drift <= 1e-4);
  }
  SUBCASE("random path on the hyperbolic plane conserves the norm") {
    const auto chart = geometry::make_chart("hyperbolic2");
    const auto e = simulate_manifold_diffusion(chart, {}, v2(1.0, 0.0), 1.0, 1e-3, 1, 3, 0.5);
    const Mat path = e.path(0);
    const Vec v0 = v2(0.2, 0.9);
    const auto v = parallel_transport(chart, path, v0);
    const double n0 = v0.dot(chart.metric(path.row(0).transpose()) * v0);
    for (Eigen::Index k = 0; k < path.rows(); ++k) {
      const double nk = v[k].dot(chart.metric(path.row(k).transpose()) * v[k]);
      REQUIRE(std::abs(nk / n0 - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("frame bundle lift") {
  SUBCASE("flat chart") {
    const auto chart = geometry::make_chart("euclidean:2");
    const FrameState f0{v2(0, 0), Mat::Identity(2, 2)};
    const auto fe = frame_bundle_simulate(chart, f0, 1.0, 0.01, 2000, 4);
    CHECK((fe.frame(7, fe.base.steps()) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(stats::variance(endpoint(fe.base, 0)) - 1.0) < 0.1);
  }
  SUBCASE("sphere projection matches manifold diffusion") {
    const auto sphere = geometry::make_chart("sphere2");
    const Vec x0 = v2(1.0, 0.0);
    const FrameState f0{x0, Eigen::Vector2d(1.0, 1.0 / std::sin(1.0)).asDiagonal()};
    const auto fe = frame_bundle_simulate(sphere, f0, 0.5, 0.005, 5000, 6);
    CHECK(fe.max_defect <= 1e-6);
    const auto md = simulate_manifold_diffusion(sphere, {}, x0, 0.5, 0.005, 5000, 1006, 1.0);
    std::vector<double> a, b;
    for (double th : endpoint(fe.base, 0)) a.push_back(std::cos(th));
    for (double th : endpoint(md, 0)) b.push_back(std::cos(th));
    CHECK(stats::ks_two_sample(a, b).p_value > 0.01);
    for (std::size_t k = 0; k <= fe.base.steps(); k += 10)
      REQUIRE(orthonormality_defect(sphere, {fe.base.state(3, k), fe.frame(3, k)}) <= 1e-6);
  }
  SUBCASE("non-orthonormal start is rejected") {
    const auto chart = geometry::make_chart("euclidean:2");
    CHECK_THROWS_AS(frame_bundle_simulate(chart, {v2(0, 0), 2.0 * Mat::Identity(2, 2)}, 1.0, 0.1, 1, 1),
                    ParameterError);
  }
}

TEST_CASE("generator examples") {
  Vec x(1);
  x << 0.4;
  const auto line = geometry::make_chart("euclidean:1");
  CHECK(generator_apply(line, {}, [](const Vec& p) { return p[0] * p[0]; }, x) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(generator_apply(line, [](const Vec&) -> Vec { return scalar(2.0); }, [](const Vec& p) { return p[0]; }, x) ==
        doctest::Approx(2.0).epsilon(1e-8));
  CHECK(generator_apply(geometry::make_chart("sphere2"), {}, [](const Vec& p) { return std::cos(p[0]); }, v2(1.0, 0.0)) ==
        doctest::Approx(-std::cos(1.0)).epsilon(1e-5));
}

TEST_CASE("semimartingale decomposition") {
  const ItoProcessSpec drift_only{[](double, const Vec&) -> Vec { return scalar(0.8); }, 0.0, 1, {}, 0, ""};
  const auto d = simulate_ito(drift_only, scalar(0.3), 1.0, 0.01, 1, 1);
  const auto dec = decompose_semimartingale(d.path(0), 10);
  CHECK(dec.martingale_part.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(dec.residual == 0.0);
  CHECK((dec.bounded_variation_part + dec.martingale_part - d.path(0)).cwiseAbs().maxCoeff() == 0.0);

  const auto w = simulate_ito(wiener(1), scalar(0.0), 10.0, 1e-3, 1, 2);
  const Mat path = w.path(0);
  const auto bm = decompose_semimartingale(path, 50);
  // Exact wherever a representable remainder exists; otherwise within one ulp of the parts.
  CHECK(bm.residual <= 1e-15 * (1.0 + path.cwiseAbs().maxCoeff()));
  CHECK((bm.bounded_variation_part + bm.martingale_part - path).cwiseAbs().maxCoeff() == bm.residual);
  // Time-average slope of the drift part estimates the drift; its standard error is 1/√T.
  const double slope = (bm.bounded_variation_part(path.rows() - 1, 0) - bm.bounded_variation_part(0, 0)) / 10.0;
  CHECK(std::abs(slope) < 3.0 / std::sqrt(10.0));
  CHECK_THROWS_AS(decompose_semimartingale(path, 1), ParameterError);
  CHECK_THROWS_AS(decompose_semimartingale(path.topRows(5), 10), ParameterError);
}

TEST_CASE("fractal scaling") {
  const std::vector<std::size_t> scales{1, 2, 4, 8, 16, 32};
  const ItoProcessSpec line{[](double, const Vec&) -> Vec { return scalar(1.0); }, 0.0, 1, {}, 0, ""};
  const auto straight = fractal_scaling(simulate_ito(line, scalar(0.0), 1.0, 1.0 / 1024, 1, 1), scales);
  CHECK(std::abs(straight.fitted_dimension - 1.0) <= 0.01);

  const auto brownian = simulate_ito(wiener(1), scalar(0.0), 1.0, 1.0 / 1024, 4000, 12);
  const auto report = fractal_scaling(brownian, scales);
  CHECK(std::abs(report.fitted_dimension - 2.0) <= 0.1);
  CHECK(std::abs(report.diffusion_coefficient / 0.5 - 1.0) <= 0.05);
  for (std::size_t i = 1; i < report.lengths.size(); ++i) CHECK(report.lengths[i] <= report.lengths[i - 1]);
  CHECK(report.fluctuation_plus > 0.0);
  CHECK(report.fluctuation_minus > 0.0);
  CHECK_THROWS_AS(fractal_scaling(brownian, {1, 2, 4}), ParameterError);
}

TEST_CASE("ensemble persistence round-trips") {
  const ItoProcessSpec ou{[](double, const Vec& x) -> Vec { return -x; }, 0.3, 2, {}, 0, "ou"};
  auto e = simulate_ito(ou, v2(0.1, 1.0 / 3.0), 0.1, 0.01, 3, 77);
  const auto csv = scratch("ensemble.csv");
  write_csv(e, csv);
  const auto back = read_csv(csv);
  CHECK(back.data() == e.data());
  CHECK(back.steps() == e.steps());
  CHECK(back.dt() == e.dt());
  std::ifstream header(csv);
  std::string first;
  std::getline(header, first);
  CHECK(first == "path_id,step,t,x0,x1");
  const auto bin = scratch("ensemble.bin");
  write_binary(e, bin);
  const auto bb = read_binary(bin);
  CHECK(bb.data() == e.data());
  CHECK(bb.seed == 77);
  CHECK(bb.drift_name == "ou");
  const auto m = manifest(e);
  CHECK(m["N"] == 3);
  CHECK(m["drift_name"] == "ou");
  CHECK(m["chart"] == "euclidean:2");
}
