#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace recomb {

// Raised for invalid process or run parameters; field() names the offending key.
class SpecError : public std::invalid_argument {
 public:
  SpecError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Ornstein-Uhlenbeck process dX = kappa (theta - X) dt + sigma_j dW on a
// uniform grid of `levels` steps of length `dt`.
//
// All parameters are in state units. With log_space set the state is the log
// of the quoted quantity (exponential OU); only the quoting of outputs changes.
struct OUSpec {
  double kappa = 0.0;
  double theta = 0.0;
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(1, 0.01);
  double x0 = 0.0;
  double dt = 1.0;
  int levels = 1;
  bool log_space = false;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

void validate(const OUSpec& spec);

// Volatility of step j, honouring the single-entry broadcast rule.
double sigma_at(const OUSpec& spec, int j);

// E[X(t_{j+1}) | X(t_j) = x].
double conditional_mean(const OUSpec& spec, int j, double x);

// Var(X(t_{j+1}) | X(t_j)); state-free under deterministic volatility.
double conditional_variance(const OUSpec& spec, int j);

// Exact moments of X(t_j) given X(0) = x0, for 0 <= j <= levels.
Moments terminal_moments(const OUSpec& spec, int j);

// Maps a lattice state to the quoted quantity (exp in log space).
inline double quote(const OUSpec& spec, double state) {
  return spec.log_space ? std::exp(state) : state;
}

// Conditional moments consumed by the lattice builder.
struct MomentModel {
  std::function<double(int, double)> mean_fn;
  Eigen::VectorXd var;  // one entry per step
  Eigen::VectorXd t;    // levels + 1 grid times
  double initial = 0.0;

  int levels() const { return static_cast<int>(var.size()); }
  double mean(int j, double x) const { return mean_fn(j, x); }
};

MomentModel make_moment_model(const OUSpec& spec);

}  // namespace recomb
