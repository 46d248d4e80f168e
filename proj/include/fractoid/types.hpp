#pragma once

#include <Eigen/Dense>
#include <functional>

namespace fractoid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;
/// Time-dependent vector field (t, x) -> vector.
using TimeVectorField = std::function<Vec(double, const Vec&)>;
/// Time-dependent matrix field, e.g. a diffusion coefficient (t, x) -> matrix.
using TimeMatrixField = std::function<Mat(double, const Vec&)>;

/// Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

}  // namespace fractoid
