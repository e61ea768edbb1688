#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace recomb {

// Linear curve model y(tau) = sum_n c_n B_n(tau) over a closed maturity range.
class CurveBasis {
 public:
  using Function = std::function<double(double)>;

  // B_n is the natural cubic spline through the unit vector e_n at the knots,
  // so sum_n c_n B_n interpolates c at the knots. Needs >= 2 increasing knots.
  static CurveBasis natural_cubic(std::vector<double> knots);
  static CurveBasis from_functions(std::vector<Function> functions, double lo, double hi);

  Eigen::Index size() const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& knots() const { return knots_; }

  // All basis values at tau.
  Eigen::VectorXd eval(double tau) const;

 private:
  CurveBasis() = default;

  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> knots_;
  Eigen::MatrixXd second_derivs_;  // row i: d^2 B_n / d tau^2 at knot i
  std::vector<Function> functions_;
};

// Yield at maturity tau for coefficients c (one per basis function).
double curve_at(const CurveBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                double tau);

}  // namespace recomb
