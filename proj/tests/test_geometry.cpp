#include <doctest.h>

#include <cmath>

#include "fractoid/error.hpp"
#include "fractoid/geometry.hpp"
#include "oracles/oracles.hpp"

using namespace fractoid;
using namespace fractoid::geometry;

namespace {

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

}  // namespace

TEST_CASE("euclidean christoffel vanishes") {
  const auto chart = make_chart("euclidean:3");
  const auto g = christoffel(chart, Eigen::Vector3d(0.3, -2.0, 7.0));
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(g(k, i, j) == 0.0);
}

TEST_CASE("polar and sphere christoffel symbols") {
  const auto polar = christoffel(make_chart("polar2"), v2(2.0, 0.4));
  CHECK(polar(0, 1, 1) == doctest::Approx(-2.0));
  CHECK(polar(1, 0, 1) == doctest::Approx(0.5));
  const auto sphere = christoffel(make_chart("sphere2"), v2(M_PI / 4, 1.0));
  CHECK(sphere(0, 1, 1) == doctest::Approx(-0.5));
  CHECK(sphere(1, 0, 1) == doctest::Approx(1.0));
  CHECK(sphere.levi_civita());
}

TEST_CASE("analytic and finite-difference christoffel agree on every registered chart") {
  const std::vector<std::pair<std::string, Vec>> cases{
      {"polar2", v2(1.7, 0.3)}, {"sphere2", v2(1.1, 2.0)}, {"hyperbolic2", v2(0.8, -1.0)},
      {"euclidean:2", v2(3.0, 4.0)}, {"minkowski:1+3", Eigen::Vector4d(0.1, 0.2, 0.3, 0.4)}};
  for (const auto& [name, x] : cases) {
    CAPTURE(name);
    const auto chart = make_chart(name);
    const auto a = christoffel(chart, x, Derivatives::automatic);
    const auto f = christoffel(chart, x, Derivatives::finite_difference);
    const auto o = oracle::christoffel([&](const Vec& p) { return chart.metric(p); }, x);
    const int n = chart.dimension();
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          CHECK(std::abs(a(k, i, j) - f(k, i, j)) < 1e-4);
          CHECK(std::abs(a(k, i, j) - o[k](i, j)) < 1e-4);
          CHECK(std::abs(a(k, i, j) - a(k, j, i)) < 1e-10);
        }
  }
}

TEST_CASE("ricci of constant-curvature charts") {
  const auto sphere = make_chart("sphere2");
  const Vec x = v2(M_PI / 3, 0.2);
  const Mat ric = ricci(sphere, x);
  CHECK((ric - sphere.metric(x)).cwiseAbs().maxCoeff() < 1e-4);
  const auto hyper = make_chart("hyperbolic2");
  const Vec y = v2(0.9, 0.1);
  CHECK((ricci(hyper, y) + hyper.metric(y)).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(ricci(make_chart("euclidean:3"), Eigen::Vector3d(1, 2, 3)).cwiseAbs().maxCoeff() == 0.0);
  for (const auto* name : {"polar2", "sphere2", "hyperbolic2"}) {
    const auto chart = make_chart(name);
    const Vec p = v2(0.7, 0.3);
    const Mat r = ricci(chart, p, Derivatives::finite_difference);
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    const double k = oracle::gaussian_curvature([&](const Vec& q) { return chart.metric(q); }, p);
    CHECK((r - k * chart.metric(p)).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("laplace-beltrami examples") {
  const auto line = make_chart("euclidean:1");
  Vec x(1);
  x << 0.7;
  CHECK(laplace_beltrami(line, [](const Vec& p) { return p[0] * p[0]; }, x) == doctest::Approx(2.0).epsilon(1e-6));
  const auto sphere = make_chart("sphere2");
  const ScalarField cos_theta = [](const Vec& p) { return std::cos(p[0]); };
  CHECK(laplace_beltrami(sphere, cos_theta, v2(1.0, 0.0)) == doctest::Approx(-2.0 * std::cos(1.0)).epsilon(1e-5));
  CHECK(std::abs(laplace_beltrami(sphere, cos_theta, v2(1.0, 0.0)) -
                 oracle::laplacian_divergence([&](const Vec& q) { return sphere.metric(q); }, cos_theta, v2(1.0, 0.0))) <
        1e-4);
  const auto polar = make_chart("polar2");
  CHECK(laplace_beltrami(polar, [](const Vec& p) { return p[0] * p[0]; }, v2(3.0, 0.5)) ==
        doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("laplace-beltrami is chart independent on the plane") {
  // f = x e^{y} in Cartesian and polar coordinates.
  const ScalarField cart = [](const Vec& p) { return p[0] * std::exp(p[1]); };
  const ScalarField polar_f = [](const Vec& p) { return p[0] * std::cos(p[1]) * std::exp(p[0] * std::sin(p[1])); };
  const double r = 1.3, phi = 0.6;
  const double a = laplace_beltrami(make_chart("euclidean:2"), cart, v2(r * std::cos(phi), r * std::sin(phi)));
  const double b = laplace_beltrami(make_chart("polar2"), polar_f, v2(r, phi));
  CHECK(std::abs(a - b) < 1e-4);
}

TEST_CASE("domain and degeneracy errors") {
  const auto sphere = make_chart("sphere2");
  CHECK_THROWS_AS(christoffel(sphere, v2(0.01, 0.0)), DomainError);
  CHECK_THROWS_AS(christoffel(make_chart("polar2"), v2(1e-4, 0.0)), DomainError);
  const MetricChart flat_bad("degenerate", 2, {2, 0}, [](const Vec&) -> Mat { return v2(1.0, 0.0).asDiagonal(); });
  CHECK_THROWS_AS(christoffel(flat_bad, v2(0, 0)), SingularMetricError);
  CHECK_THROWS_AS(make_chart("sphere3"), ConfigError);
  try {
    make_chart("sphere3");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sphere3") != std::string::npos);
  }
}

TEST_CASE("chart invariants and signature") {
  for (const auto* name : {"polar2", "sphere2", "hyperbolic2"}) CHECK_NOTHROW(make_chart(name).check_invariants(v2(1.0, 0.5)));
  const auto mink = make_chart("minkowski:1+3");
  CHECK_NOTHROW(mink.check_invariants(Eigen::Vector4d::Zero()));
  CHECK(mink.signature() == Signature{3, 1});
  CHECK(mink.signature_matrix()(0, 0) == -1.0);
  const MetricChart wrong("wrong", 2, {1, 1}, [](const Vec&) -> Mat { return Mat::Identity(2, 2); });
  CHECK_THROWS_AS(wrong.check_invariants(v2(0, 0)), ConventionError);
}

TEST_CASE("torsion of an artificial connection") {
  const ConnectionField twisted = [](const Vec&) {
    ConnectionCoefficients c(3);
    c(2, 0, 1) = 0.7;
    return c;
  };
  const VectorField e1 = [](const Vec&) -> Vec { return Eigen::Vector3d(1, 0, 0); };
  const VectorField e2 = [](const Vec&) -> Vec { return Eigen::Vector3d(0, 1, 0); };
  const Vec x = Eigen::Vector3d(0.2, 0.3, 0.4);
  const Vec t12 = torsion(twisted, e1, e2, x).components;
  const Vec t21 = torsion(twisted, e2, e1, x).components;
  CHECK((t12 - Eigen::Vector3d(0, 0, 0.7)).norm() < 1e-12);
  CHECK((t21 - Eigen::Vector3d(0, 0, -0.7)).norm() < 1e-12);

  // Non-constant fields: exact antisymmetry of the same evaluation path.
  const VectorField xf = [](const Vec& p) -> Vec { return Eigen::Vector3d(p[1] * p[2], std::sin(p[0]), 1.0); };
  const VectorField yf = [](const Vec& p) -> Vec { return Eigen::Vector3d(p[0], p[0] * p[1], std::exp(p[2])); };
  const Vec a = torsion(twisted, xf, yf, x).components;
  const Vec b = torsion(twisted, yf, xf, x).components;
  for (int k = 0; k < 3; ++k) CHECK(a[k] == -b[k]);
}

TEST_CASE("levi-civita torsion vanishes") {
  const auto chart = make_chart("polar2");
  const VectorField xf = [](const Vec& p) -> Vec { return v2(p[1], 1.0 + p[0]); };
  const VectorField yf = [](const Vec& p) -> Vec { return v2(std::cos(p[1]), p[0] * p[0]); };
  const Vec t = torsion(levi_civita(chart), xf, yf, v2(1.5, 0.4)).components;
  CHECK(t.norm() < 1e-8);
}

TEST_CASE("leibniz rule residual") {
  const auto chart = make_chart("polar2");
  const auto nabla = levi_civita(chart);
  const VectorField dr = [](const Vec&) -> Vec { return v2(1, 0); };
  const VectorField dphi = [](const Vec&) -> Vec { return v2(0, 1); };
  const Vec x = v2(1.5, 0.3);
  CHECK(leibniz_residual(nabla, [](const Vec&) { return 1.0; }, dr, dphi, x) == 0.0);
  CHECK(leibniz_residual(nabla, [](const Vec&) { return 0.0; }, dr, dphi, x) == 0.0);
  CHECK(leibniz_residual(nabla, [](const Vec& p) { return p[0]; }, dr, dphi, x) <= 1e-6);
  const VectorField curly = [](const Vec& p) -> Vec { return v2(p[1] * p[1], std::sin(p[0])); };
  CHECK(leibniz_residual(nabla, [](const Vec& p) { return p[0] * std::cos(p[1]); }, curly, dphi, x) <= 1e-6);
}

TEST_CASE("custom diagonal chart from json") {
  const nlohmann::json d = {{"name", "round"},
                            {"dimension", 2},
                            {"signature", {2, 0}},
                            {"diagonal_entries", {"1", "sin(x0)^2"}}};
  const auto chart = chart_from_json(d);
  const Vec x = v2(M_PI / 4, 0.0);
  const auto gamma = christoffel(chart, x);
  CHECK(gamma(0, 1, 1) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK((ricci(chart, v2(1.0, 0.0)) - chart.metric(v2(1.0, 0.0))).cwiseAbs().maxCoeff() < 1e-4);
  nlohmann::json missing = d;
  missing.erase("signature");
  CHECK_THROWS_AS(chart_from_json(missing), ConfigError);
  nlohmann::json bad = d;
  bad["diagonal_entries"] = {"1", "tan(x0)"};
  CHECK_THROWS_AS(chart_from_json(bad), ConfigError);
}

TEST_CASE("vector laplacian") {
  const auto flat = make_chart("euclidean:2");
  const VectorField y = [](const Vec& p) -> Vec { return v2(p[0] * p[0] + p[1], p[0] * p[1] * p[1]); };
  const Vec lap = vector_laplacian(flat, y, v2(0.5, 1.5));
  CHECK(lap[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(lap[1] == doctest::Approx(1.0).epsilon(1e-5));
  // Rough Laplacian of a Cartesian-constant field expressed in polar coordinates is 0.
  const auto polar = make_chart("polar2");
  const VectorField ex = [](const Vec& p) -> Vec { return v2(std::cos(p[1]), -std::sin(p[1]) / p[0]); };
  CHECK(vector_laplacian(polar, ex, v2(1.4, 0.7)).norm() < 1e-5);
  const Vec fine = vector_laplacian(flat, [](const Vec& p) -> Vec { return p / 3.0; }, v2(0.3, 0.8), Stencil::fine);
  CHECK(fine.norm() < 1e-10);
}

TEST_CASE("covariant jacobian of a parallel field on the plane") {
  const auto polar = make_chart("polar2");
  const VectorField ex = [](const Vec& p) -> Vec { return v2(std::cos(p[1]), -std::sin(p[1]) / p[0]); };
  CHECK(covariant_jacobian(polar, ex, v2(2.0, 0.3)).cwiseAbs().maxCoeff() < 1e-8);
}
