#include "recomb/process.hpp"

#include <cmath>
#include <string>

namespace recomb {
namespace {

// Below this kappa*dt the closed-form variance is replaced by its series.
constexpr double kSmallDecay = 1e-8;

void check_level(int j, int upper) {
  if (j < 0 || j > upper) {
    throw std::out_of_range("level index " + std::to_string(j) +
                            " outside [0, " + std::to_string(upper) + "]");
  }
}

double decay(const OUSpec& spec) { return std::exp(-spec.kappa * spec.dt); }

}  // namespace

void validate(const OUSpec& spec) {
  if (!std::isfinite(spec.kappa) || spec.kappa < 0.0) {
    throw SpecError("kappa", "must be finite and >= 0");
  }
  if (!std::isfinite(spec.theta)) throw SpecError("theta", "must be finite");
  if (!std::isfinite(spec.x0)) throw SpecError("x0", "must be finite");
  if (!std::isfinite(spec.dt) || spec.dt <= 0.0) {
    throw SpecError("dt", "must be finite and > 0");
  }
  if (spec.levels < 1) throw SpecError("levels", "must be >= 1");
  const auto n = spec.sigma.size();
  if (n != 1 && n != spec.levels) {
    throw SpecError("sigma", "expected 1 or " + std::to_string(spec.levels) +
                                 " entries, got " + std::to_string(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(spec.sigma[i]) || spec.sigma[i] <= 0.0) {
      throw SpecError("sigma", "entry " + std::to_string(i) + " must be > 0");
    }
  }
}

double sigma_at(const OUSpec& spec, int j) {
  return spec.sigma.size() == 1 ? spec.sigma[0] : spec.sigma[j];
}

double conditional_mean(const OUSpec& spec, int j, double x) {
  check_level(j, spec.levels - 1);
  const double a = decay(spec);
  return x * a + spec.theta * (1.0 - a);
}

double conditional_variance(const OUSpec& spec, int j) {
  check_level(j, spec.levels - 1);
  const double s = sigma_at(spec, j);
  const double kdt = spec.kappa * spec.dt;
  if (kdt < kSmallDecay) {
    // sigma^2 (1 - e^{-2 k dt}) / (2k) = sigma^2 dt (1 - k dt + O((k dt)^2))
    return s * s * spec.dt * (1.0 - kdt);
  }
  return -s * s * std::expm1(-2.0 * kdt) / (2.0 * spec.kappa);
}

Moments terminal_moments(const OUSpec& spec, int j) {
  check_level(j, spec.levels);
  const double a = decay(spec);
  Moments m{spec.x0, 0.0};
  for (int i = 0; i < j; ++i) {
    m.mean = m.mean * a + spec.theta * (1.0 - a);
    m.variance = m.variance * a * a + conditional_variance(spec, i);
  }
  return m;
}

MomentModel make_moment_model(const OUSpec& spec) {
  validate(spec);
  MomentModel model;
  model.var.resize(spec.levels);
  for (int j = 0; j < spec.levels; ++j) model.var[j] = conditional_variance(spec, j);
  model.t = Eigen::VectorXd::LinSpaced(spec.levels + 1, 0.0, spec.levels * spec.dt);
  model.initial = spec.x0;
  const double a = decay(spec);
  const double pull = spec.theta * (1.0 - a);
  model.mean_fn = [a, pull](int, double x) { return x * a + pull; };
  return model;
}

}  // namespace recomb
