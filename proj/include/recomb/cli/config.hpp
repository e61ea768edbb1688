#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recomb/price.hpp"
#include "recomb/process.hpp"

namespace recomb::cli {

struct PayoffConfig {
  std::string kind = "zero";  // zero | constant | call | put
  double strike = 0.0;
  double amount = 0.0;
  bool all_levels = false;
  std::vector<int> exercise_levels;
};

struct DiscountConfig {
  std::string kind = "none";  // none | flat | short_rate
  double rate = 0.0;
};

// A whole run in one JSON document. Unknown keys are rejected.
struct RunConfig {
  std::optional<OUSpec> process;
  std::vector<OUSpec> forest_specs;
  Eigen::MatrixXd corr;
  std::vector<double> knots;
  PayoffConfig payoff;
  DiscountConfig discount;
  BondSpec bond;
  std::uint64_t seed = 0;
  std::size_t paths = 1000;
  std::optional<std::string> out;

  // The spec driving single-lattice commands: process, else the first tree.
  const OUSpec& primary() const;
};

// Throws SpecError naming the offending key path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

OUSpec parse_process(const nlohmann::json& j, const std::string& where);

// Payoff and discount in lattice-state terms for a given process.
PayoffSpec make_payoff(const PayoffConfig& cfg, const OUSpec& spec);
DiscountSpec make_discount(const DiscountConfig& cfg, const OUSpec& spec);

}  // namespace recomb::cli
