#include "recomb/curve.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace recomb {

CurveBasis CurveBasis::natural_cubic(std::vector<double> knots) {
  const auto n = static_cast<Eigen::Index>(knots.size());
  if (n < 2) throw std::invalid_argument("natural cubic basis needs at least two knots");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(knots[i]) || (i > 0 && !(knots[i] > knots[i - 1]))) {
      throw std::invalid_argument("knots must be finite and strictly increasing");
    }
  }
  CurveBasis basis;
  basis.lo_ = knots.front();
  basis.hi_ = knots.back();
  basis.second_derivs_ = Eigen::MatrixXd::Zero(n, n);
  if (n > 2) {
    // Interior second derivatives m solve A m = R y for every data vector y;
    // the columns of A^{-1} R are the basis second derivatives.
    const Eigen::Index m = n - 2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      const double h0 = knots[i] - knots[i - 1];
      const double h1 = knots[i + 1] - knots[i];
      const Eigen::Index r = i - 1;
      A(r, r) = (h0 + h1) / 3.0;
      if (r > 0) A(r, r - 1) = h0 / 6.0;
      if (r + 1 < m) A(r, r + 1) = h1 / 6.0;
      R(r, i - 1) = 1.0 / h0;
      R(r, i) = -1.0 / h0 - 1.0 / h1;
      R(r, i + 1) = 1.0 / h1;
    }
    basis.second_derivs_.middleRows(1, m) = A.partialPivLu().solve(R);
  }
  basis.knots_ = std::move(knots);
  return basis;
}

CurveBasis CurveBasis::from_functions(std::vector<Function> functions, double lo, double hi) {
  if (functions.empty()) throw std::invalid_argument("basis needs at least one function");
  if (!(lo <= hi)) throw std::invalid_argument("basis range must satisfy lo <= hi");
  CurveBasis basis;
  basis.lo_ = lo;
  basis.hi_ = hi;
  basis.functions_ = std::move(functions);
  return basis;
}

Eigen::Index CurveBasis::size() const {
  return functions_.empty() ? static_cast<Eigen::Index>(knots_.size())
                            : static_cast<Eigen::Index>(functions_.size());
}

Eigen::VectorXd CurveBasis::eval(double tau) const {
  if (!(tau >= lo_ && tau <= hi_)) {
    throw std::out_of_range("maturity " + std::to_string(tau) + " outside basis range");
  }
  if (!functions_.empty()) {
    Eigen::VectorXd out(size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = functions_[i](tau);
    return out;
  }
  const auto upper = std::upper_bound(knots_.begin(), knots_.end(), tau);
  auto i = static_cast<Eigen::Index>(std::distance(knots_.begin(), upper)) - 1;
  i = std::clamp<Eigen::Index>(i, 0, size() - 2);
  const double h = knots_[i + 1] - knots_[i];
  const double a = (knots_[i + 1] - tau) / h;
  const double b = 1.0 - a;
  Eigen::VectorXd out = ((a * a * a - a) * second_derivs_.row(i) +
                         (b * b * b - b) * second_derivs_.row(i + 1))
                            .transpose() *
                        (h * h / 6.0);
  out[i] += a;
  out[i + 1] += b;
  return out;
}

double curve_at(const CurveBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                double tau) {
  if (coeffs.size() != basis.size()) {
    throw std::invalid_argument("expected " + std::to_string(basis.size()) +
                                " coefficients, got " + std::to_string(coeffs.size()));
  }
  return basis.eval(tau).dot(coeffs);
}

}  // namespace recomb
