#include "recomb/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <sstream>

namespace recomb::cli {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SpecError(where, "must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw SpecError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SpecError(where, "must be a number");
  return j.get<double>();
}

double number_or(const json& j, const char* key, const std::string& where, double fallback) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SpecError(where, "must be an integer");
  return j.get<int>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw SpecError(where, "must be a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw SpecError(where, "must be a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw SpecError(where, "must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

PayoffConfig parse_payoff(const json& j) {
  require_object(j, "payoff", {"kind", "strike", "amount", "exercise_levels"});
  PayoffConfig cfg;
  if (j.contains("kind")) cfg.kind = text(j.at("kind"), "payoff.kind");
  if (cfg.kind != "zero" && cfg.kind != "constant" && cfg.kind != "call" && cfg.kind != "put") {
    throw SpecError("payoff.kind", "expected zero, constant, call or put");
  }
  cfg.strike = number_or(j, "strike", "payoff", 0.0);
  cfg.amount = number_or(j, "amount", "payoff", 0.0);
  if (j.contains("exercise_levels")) {
    const auto& ex = j.at("exercise_levels");
    if (ex.is_string()) {
      if (ex.get<std::string>() != "all") {
        throw SpecError("payoff.exercise_levels", "expected \"all\" or an array");
      }
      cfg.all_levels = true;
    } else if (ex.is_array()) {
      for (std::size_t i = 0; i < ex.size(); ++i) {
        cfg.exercise_levels.push_back(
            integer(ex[i], "payoff.exercise_levels[" + std::to_string(i) + "]"));
      }
    } else {
      throw SpecError("payoff.exercise_levels", "expected \"all\" or an array");
    }
  }
  return cfg;
}

DiscountConfig parse_discount(const json& j) {
  require_object(j, "discount", {"kind", "rate"});
  DiscountConfig cfg;
  if (j.contains("kind")) cfg.kind = text(j.at("kind"), "discount.kind");
  if (cfg.kind != "none" && cfg.kind != "flat" && cfg.kind != "short_rate") {
    throw SpecError("discount.kind", "expected none, flat or short_rate");
  }
  cfg.rate = number_or(j, "rate", "discount", 0.0);
  return cfg;
}

BondSpec parse_schedules(const json& j) {
  require_object(j, "schedules", {"coupons", "calls", "face"});
  BondSpec bond;
  bond.face = number_or(j, "face", "schedules", 100.0);
  if (j.contains("coupons")) {
    const auto& list = j.at("coupons");
    if (!list.is_array()) throw SpecError("schedules.coupons", "must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto where = "schedules.coupons[" + std::to_string(i) + "]";
      require_object(list[i], where, {"level", "amount"});
      bond.coupons.push_back({integer(list[i].at("level"), where + ".level"),
                              number(list[i].at("amount"), where + ".amount")});
    }
  }
  if (j.contains("calls")) {
    const auto& list = j.at("calls");
    if (!list.is_array()) throw SpecError("schedules.calls", "must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto where = "schedules.calls[" + std::to_string(i) + "]";
      require_object(list[i], where, {"level", "price"});
      bond.calls.push_back({integer(list[i].at("level"), where + ".level"),
                            number(list[i].at("price"), where + ".price")});
    }
  }
  return bond;
}

}  // namespace

OUSpec parse_process(const json& j, const std::string& where) {
  require_object(j, where, {"kappa", "theta", "sigma", "x0", "dt", "levels", "log_space"});
  for (const char* key : {"sigma", "dt", "levels"}) {
    if (!j.contains(key)) throw SpecError(where + "." + key, "is required");
  }
  OUSpec spec;
  spec.kappa = number_or(j, "kappa", where, 0.0);
  spec.theta = number_or(j, "theta", where, 0.0);
  spec.x0 = number_or(j, "x0", where, 0.0);
  spec.dt = number(j.at("dt"), where + ".dt");
  spec.levels = integer(j.at("levels"), where + ".levels");
  const auto& sigma = j.at("sigma");
  if (sigma.is_array()) {
    const auto v = numbers(sigma, where + ".sigma");
    spec.sigma = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    spec.sigma = Eigen::VectorXd::Constant(1, number(sigma, where + ".sigma"));
  }
  if (j.contains("log_space")) {
    if (!j.at("log_space").is_boolean()) throw SpecError(where + ".log_space", "must be a boolean");
    spec.log_space = j.at("log_space").get<bool>();
  }
  try {
    validate(spec);
  } catch (const SpecError& e) {
    throw SpecError(where + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
  return spec;
}

const OUSpec& RunConfig::primary() const {
  if (process) return *process;
  if (!forest_specs.empty()) return forest_specs.front();
  throw SpecError("process", "is required");
}

RunConfig parse_config(const json& doc) {
  require_object(doc, "", {"process", "forest", "basis", "payoff", "discount", "schedules",
                           "seed", "paths", "out"});
  RunConfig cfg;
  if (doc.contains("process")) cfg.process = parse_process(doc.at("process"), "process");
  if (doc.contains("forest")) {
    const auto& f = doc.at("forest");
    require_object(f, "forest", {"specs", "corr"});
    if (!f.contains("specs") || !f.at("specs").is_array() || f.at("specs").empty()) {
      throw SpecError("forest.specs", "must be a non-empty array");
    }
    const auto& specs = f.at("specs");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      cfg.forest_specs.push_back(
          parse_process(specs[i], "forest.specs[" + std::to_string(i) + "]"));
    }
    const auto n = static_cast<Eigen::Index>(cfg.forest_specs.size());
    cfg.corr = Eigen::MatrixXd::Identity(n, n);
    if (f.contains("corr")) {
      const auto& rows = f.at("corr");
      if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n) {
        throw SpecError("forest.corr", "must be an array of " + std::to_string(n) + " rows");
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = numbers(rows[r], "forest.corr[" + std::to_string(r) + "]");
        if (static_cast<Eigen::Index>(row.size()) != n) {
          throw SpecError("forest.corr[" + std::to_string(r) + "]",
                          "must have " + std::to_string(n) + " entries");
        }
        for (Eigen::Index c = 0; c < n; ++c) cfg.corr(r, c) = row[c];
      }
    }
  }
  if (doc.contains("basis")) {
    require_object(doc.at("basis"), "basis", {"knots"});
    if (doc.at("basis").contains("knots")) {
      cfg.knots = numbers(doc.at("basis").at("knots"), "basis.knots");
    }
  }
  if (doc.contains("payoff")) cfg.payoff = parse_payoff(doc.at("payoff"));
  if (doc.contains("discount")) cfg.discount = parse_discount(doc.at("discount"));
  if (doc.contains("schedules")) cfg.bond = parse_schedules(doc.at("schedules"));
  if (doc.contains("seed")) cfg.seed = unsigned_integer(doc.at("seed"), "seed");
  if (doc.contains("paths")) cfg.paths = unsigned_integer(doc.at("paths"), "paths");
  if (doc.contains("out")) cfg.out = text(doc.at("out"), "out");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("config", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

PayoffSpec make_payoff(const PayoffConfig& cfg, const OUSpec& spec) {
  const auto q = [spec](double state) { return quote(spec, state); };
  PayoffSpec payoff;
  if (cfg.kind == "zero") {
    payoff.terminal = [](double) { return 0.0; };
  } else if (cfg.kind == "constant") {
    payoff.terminal = [c = cfg.amount](double) { return c; };
  } else if (cfg.kind == "call") {
    payoff.terminal = [q, k = cfg.strike](double x) { return std::max(q(x) - k, 0.0); };
  } else {
    payoff.terminal = [q, k = cfg.strike](double x) { return std::max(k - q(x), 0.0); };
  }
  payoff.exercise = [f = payoff.terminal](int, int, double x) { return f(x); };
  if (cfg.all_levels) {
    payoff.exercise_levels.resize(spec.levels + 1);
    std::iota(payoff.exercise_levels.begin(), payoff.exercise_levels.end(), 0);
  } else {
    payoff.exercise_levels = cfg.exercise_levels;
  }
  for (const int j : payoff.exercise_levels) {
    if (j < 0 || j > spec.levels) {
      throw SpecError("payoff.exercise_levels", "level " + std::to_string(j) +
                                                    " outside [0, " +
                                                    std::to_string(spec.levels) + "]");
    }
  }
  return payoff;
}

DiscountSpec make_discount(const DiscountConfig& cfg, const OUSpec& spec) {
  if (cfg.kind == "flat") return DiscountSpec::flat(cfg.rate, spec.dt);
  if (cfg.kind == "short_rate") {
    return DiscountSpec::short_rate(spec.dt, [spec](double x) { return quote(spec, x); });
  }
  return DiscountSpec::none();
}

}  // namespace recomb::cli
