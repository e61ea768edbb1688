#include "recomb/price.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace recomb {
namespace {

double checked(double v, int j, int k, const char* what) {
  if (!std::isfinite(v)) {
    throw PricingError(fmt::format("{} is not finite at node ({}, {})", what, j, k));
  }
  return v;
}

double discount_at(const DiscountSpec& disc, int j, int k, double state) {
  const double d = disc.factor(j, state);
  if (!(d > 0.0 && d <= 1.0)) {
    throw PricingError(
        fmt::format("discount factor {} outside (0, 1] at node ({}, {})", d, j, k));
  }
  return d;
}

std::vector<char> level_mask(const std::vector<int>& levels, int n, const char* what) {
  std::vector<char> mask(n + 1, 0);
  for (const int j : levels) {
    if (j < 0 || j > n) {
      throw PricingError(fmt::format("{} level {} outside [0, {}]", what, j, n));
    }
    mask[j] = 1;
  }
  return mask;
}

Eigen::VectorXd terminal_values(const Lattice& lat, const std::function<double(double)>& f) {
  const int n = lat.levels();
  Eigen::VectorXd v(2 * n + 1);
  for (int k = -n; k <= n; ++k) v[k + n] = checked(f(lat.value(n, k)), n, k, "payoff");
  return v;
}

}  // namespace

DiscountSpec DiscountSpec::none() {
  return {[](int, double) { return 1.0; }};
}

DiscountSpec DiscountSpec::flat(double rate, double dt) {
  const double d = std::exp(-rate * dt);
  return {[d](int, double) { return d; }};
}

DiscountSpec DiscountSpec::short_rate(double dt, std::function<double(double)> to_rate) {
  if (!to_rate) to_rate = [](double x) { return x; };
  return {[dt, to_rate = std::move(to_rate)](int, double state) {
    return std::exp(-to_rate(state) * dt);
  }};
}

Rollback rollback(const Lattice& lat, const Eigen::Ref<const Eigen::VectorXd>& terminal,
                  const DiscountSpec& disc,
                  const std::function<double(int, int, double)>& exercise,
                  const std::vector<int>& exercise_levels, const std::vector<double>& cash) {
  const int n = lat.levels();
  if (terminal.size() != 2 * n + 1) {
    throw PricingError("terminal values must cover the last level");
  }
  if (!cash.empty() && cash.size() != static_cast<std::size_t>(n + 1)) {
    throw PricingError("cash schedule must have one entry per level");
  }
  const auto can_exercise = level_mask(exercise_levels, n, "exercise");
  if (!exercise_levels.empty() && !exercise) {
    throw PricingError("exercise levels given without an exercise payoff");
  }
  const auto cash_at = [&](int j) { return cash.empty() ? 0.0 : cash[j]; };

  Rollback out;
  out.value.resize(n + 1);
  out.continuation.resize(n + 1);
  out.continuation[n] = Eigen::VectorXd::Zero(2 * n + 1);
  out.value[n] = terminal.array() + cash_at(n);
  if (can_exercise[n]) {
    for (int k = -n; k <= n; ++k) {
      const double ex = checked(exercise(n, k, lat.value(n, k)), n, k, "exercise payoff");
      out.value[n][k + n] = cash_at(n) + std::max(ex, terminal[k + n]);
    }
  }

  for (int j = n - 1; j >= 0; --j) {
    const Eigen::VectorXd& next = out.value[j + 1];
    Eigen::VectorXd cont(2 * j + 1);
    Eigen::VectorXd val(2 * j + 1);
    const auto settle = [&](int k) {
      double v = cont[k + j];
      if (can_exercise[j]) {
        v = std::max(v, checked(exercise(j, k, lat.value(j, k)), j, k, "exercise payoff"));
      }
      val[k + j] = cash_at(j) + v;
    };

    const auto& c = lat.center_branches(j);
    const int mid = j + 1;
    cont[j] = discount_at(disc, j, 0, lat.value(j, 0)) *
              (c.p_d * next[mid - 1] + c.p_n * next[mid] + c.p_u * next[mid + 1]);
    settle(0);
    // Rings outward: each spanning node mixes its inner sibling's continuation
    // (undiscounted) with its own single time transition.
    for (int k = 1; k <= j; ++k) {
      for (const int side : {1, -1}) {
        const int self = side * k;
        const auto& s = lat.spanning(j, self);
        const double d = discount_at(disc, j, self, lat.value(j, self));
        cont[self + j] = s.p * cont[self - side + j] +
                         (1.0 - s.p) * d * next[self + side + mid];
        settle(self);
      }
    }
    out.continuation[j] = std::move(cont);
    out.value[j] = std::move(val);
  }
  return out;
}

double price_european(const Lattice& lat, const PayoffSpec& payoff, const DiscountSpec& disc) {
  return rollback(lat, terminal_values(lat, payoff.terminal), disc).value[0][0];
}

AmericanResult price_american(const Lattice& lat, const PayoffSpec& payoff,
                              const DiscountSpec& disc) {
  const auto sweep = rollback(lat, terminal_values(lat, payoff.terminal), disc,
                              payoff.exercise, payoff.exercise_levels);
  AmericanResult result;
  result.price = sweep.value[0][0];
  const auto mask = level_mask(payoff.exercise_levels, lat.levels(), "exercise");
  for (int j = 0; j <= lat.levels(); ++j) {
    if (!mask[j]) continue;
    for (int k = -j; k <= j; ++k) {
      const double hold = j == lat.levels() ? sweep.value[j][k + j] : sweep.continuation[j][k + j];
      const double ex = payoff.exercise(j, k, lat.value(j, k));
      if (j == lat.levels() ? ex > payoff.terminal(lat.value(j, k)) : ex > hold) {
        result.exercise_region.push_back({j, k});
      }
    }
  }
  return result;
}

CallableResult price_callable_bond(const Lattice& lat, const BondSpec& bond,
                                   const DiscountSpec& disc) {
  const int n = lat.levels();
  std::vector<double> cash(n + 1, 0.0);
  for (const auto& cf : bond.coupons) {
    if (cf.level < 0 || cf.level > n) {
      throw PricingError(fmt::format("coupon level {} outside [0, {}]", cf.level, n));
    }
    cash[cf.level] += cf.amount;
  }
  std::vector<double> strike(n + 1, 0.0);
  std::vector<int> call_levels;
  for (const auto& call : bond.calls) {
    if (call.level < 0 || call.level > n) {
      throw PricingError(fmt::format("call level {} outside [0, {}]", call.level, n));
    }
    strike[call.level] = call.price;
    call_levels.push_back(call.level);
  }
  std::sort(call_levels.begin(), call_levels.end());
  call_levels.erase(std::unique(call_levels.begin(), call_levels.end()), call_levels.end());

  const Eigen::VectorXd face = Eigen::VectorXd::Constant(2 * n + 1, bond.face);
  const auto bullet = rollback(lat, face, disc, {}, {}, cash);

  // Ex-coupon value of the remaining bullet at a node.
  const auto remaining = [&](int j, int k) {
    return j == n ? 0.0 : bullet.continuation[j][k + j];
  };
  const auto intrinsic = [&](int j, int k, double) {
    return std::max(remaining(j, k) - strike[j], 0.0);
  };
  const auto option = rollback(lat, Eigen::VectorXd::Zero(2 * n + 1), disc, intrinsic,
                               call_levels);

  CallableResult result;
  result.bullet = bullet.value[0][0];
  result.option = option.value[0][0];
  result.callable = result.bullet - result.option;
  for (const int j : call_levels) {
    if (j == n) continue;
    for (int k = -j; k <= j; ++k) {
      const double ex = intrinsic(j, k, 0.0);
      if (ex > 0.0 && ex >= option.continuation[j][k + j]) result.exercise_region.push_back({j, k});
    }
  }
  return result;
}

}  // namespace recomb
