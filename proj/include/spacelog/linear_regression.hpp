#pragma once

// Ordinary least squares with an intercept, solved by column-pivoted QR.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "spacelog/error.hpp"
#include "spacelog/spacecraft.hpp"

namespace spacelog {

struct LinearSurrogate {
  std::vector<double> beta;
  double intercept = 0.0;

  double predict(std::span<const double> x) const {
    if (x.size() != beta.size()) throw DomainError("LinearSurrogate: input dimension mismatch");
    double y = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) y += beta[i] * x[i];
    return y;
  }
  double predict(double x) const { return predict(std::span<const double>(&x, 1)); }
};

// Rows of X are samples. Throws DomainError when [X 1] is rank deficient.
inline LinearSurrogate fit_linear_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DomainError("fit_linear_regression: sample count mismatch");
  if (!X.allFinite() || !y.allFinite()) throw DomainError("fit_linear_regression: non-finite data");
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A << X, Eigen::VectorXd::Ones(X.rows());
  // Scale columns so the rank test is not fooled by units.
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < scale.size(); ++c)
    if (scale(c) == 0.0) throw DomainError("fit_linear_regression: rank-deficient design (zero column)");
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
  qr.setThreshold(1e-10);
  if (qr.rank() < As.cols()) throw DomainError("fit_linear_regression: rank-deficient design");
  const Eigen::VectorXd coef = qr.solve(y).cwiseQuotient(scale);
  LinearSurrogate s;
  s.beta.assign(coef.data(), coef.data() + X.cols());
  s.intercept = coef(X.cols());
  return s;
}

inline LinearSurrogate fit_linear_regression(std::span<const DataPoint> data) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    X(static_cast<Eigen::Index>(i), 0) = data[i].input;
    y(static_cast<Eigen::Index>(i)) = data[i].target;
  }
  return fit_linear_regression(X, y);
}

}  // namespace spacelog
