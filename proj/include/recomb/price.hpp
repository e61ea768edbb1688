#pragma once

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recomb/lattice.hpp"

namespace recomb {

class PricingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Payoffs are functions of the lattice state; callers quote it if needed.
struct PayoffSpec {
  std::function<double(double)> terminal;
  // Exercise value at (level, offset, state). The offset lets exercise depend
  // on node-level quantities such as the remaining bond value.
  std::function<double(int, int, double)> exercise;
  std::vector<int> exercise_levels;
};

// One-step discount factor in (0, 1] for the time transition out of a node.
// Sibling hops take no time and are never discounted.
struct DiscountSpec {
  std::function<double(int, double)> factor;

  static DiscountSpec none();
  static DiscountSpec flat(double rate, double dt);
  // Treats `to_rate(state)` as the short rate over the step.
  static DiscountSpec short_rate(double dt, std::function<double(double)> to_rate = {});
};

// Node values of one backward sweep; level j holds offsets -j..j at k + j.
using NodeValues = std::vector<Eigen::VectorXd>;

struct Rollback {
  NodeValues value;         // after exercise and cash flows
  NodeValues continuation;  // before exercise, excluding cash paid at the node
};

// General backward sweep. Level by level from the horizon: the center takes
// the discounted trinomial expectation, then rings move outward with
// continuation(k) = p * continuation(k - 1) + (1 - p) * disc * value(j + 1, k + 1).
// value = cash(j) + max(exercise, continuation) on exercise levels.
Rollback rollback(const Lattice& lat, const Eigen::Ref<const Eigen::VectorXd>& terminal,
                  const DiscountSpec& disc,
                  const std::function<double(int, int, double)>& exercise = {},
                  const std::vector<int>& exercise_levels = {},
                  const std::vector<double>& cash = {});

double price_european(const Lattice& lat, const PayoffSpec& payoff, const DiscountSpec& disc);

struct AmericanResult {
  double price = 0.0;
  std::vector<NodeCoord> exercise_region;  // exercise strictly beats continuation
};

AmericanResult price_american(const Lattice& lat, const PayoffSpec& payoff,
                              const DiscountSpec& disc);

struct CashFlow {
  int level = 0;
  double amount = 0.0;
};

struct CallDate {
  int level = 0;
  double price = 0.0;
};

struct BondSpec {
  double face = 100.0;
  std::vector<CashFlow> coupons;  // paid at the listed level
  std::vector<CallDate> calls;    // issuer may buy the remaining bond here
};

struct CallableResult {
  double bullet = 0.0;
  double option = 0.0;
  double callable = 0.0;
  std::vector<NodeCoord> exercise_region;
};

// Bullet by cash-flow injection; option as the American right to buy the
// ex-coupon bullet at the call price; callable = bullet - option.
CallableResult price_callable_bond(const Lattice& lat, const BondSpec& bond,
                                   const DiscountSpec& disc);

}  // namespace recomb
