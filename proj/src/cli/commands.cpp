#include "recomb/cli/commands.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "recomb/cli/config.hpp"
#include "recomb/curve.hpp"
#include "recomb/lattice.hpp"
#include "recomb/lattice_io.hpp"
#include "recomb/price.hpp"
#include "recomb/simulate.hpp"

namespace recomb::cli {
namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  bool report = false;
  bool strict = false;
  std::optional<std::string> lattice;
  std::size_t sweep = 0;
};

// Verification failure carrying the name of the broken invariant.
struct VerifyFailure : std::runtime_error {
  VerifyFailure(std::string check, const std::string& message)
      : std::runtime_error(message), name(std::move(check)) {}
  std::string name;
};

std::optional<std::string> output_path(const Options& opt, const RunConfig& cfg) {
  if (opt.out) return opt.out;
  return cfg.out;
}

void emit(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
  if (path) {
    write_atomically(*path, text);
  } else {
    out << text;
  }
}

double max_closure_error(const Lattice& lat) {
  double worst = 0.0;
  for (int j = 0; j < lat.levels(); ++j) {
    const auto& c = lat.center_branches(j);
    worst = std::max(worst, std::abs(c.p_u + c.p_n + c.p_d - 1.0));
  }
  return worst;
}

// ---------------------------------------------------------------- build

int cmd_build(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(opt.config);
  const auto format = parse_format(opt.format);
  const auto& spec = cfg.primary();
  Lattice lat;
  try {
    lat = build_lattice(make_moment_model(spec), {.strict_ordering = opt.strict});
  } catch (const LatticeError& e) {
    err << "build failed at node (" << e.node().j << ", " << e.node().k << "): " << e.what()
        << "\n";
    return kBuildError;
  } catch (const std::runtime_error& e) {
    err << "build failed: " << e.what() << "\n";
    return kBuildError;
  }
  const auto path = output_path(opt, cfg);
  emit(path, export_lattice(lat, format), out);
  std::ostream& summary = path ? out : err;
  summary << "nodes: " << lat.node_count() << "\n"
          << "max_prob_sum_error: " << format_double(max_closure_error(lat)) << "\n"
          << "order_violations: " << lat.order_violations().size() << "\n";
  return kOk;
}

// ------------------------------------------------------------- simulate

void report_moments(std::ostream& os, const std::string& label, const OUSpec& spec,
                    const std::vector<PathSample>& paths) {
  const auto emp = empirical_moments(paths, spec.levels);
  const auto exact = terminal_moments(spec, spec.levels);
  const double n = static_cast<double>(paths.size());
  const double se_mean = std::sqrt(exact.variance / n);
  const double se_var = exact.variance * std::sqrt(2.0 / (n - 1.0));
  os << fmt::format(
      "{}terminal mean {} (exact {}, z {:.3f}); variance {} (exact {}, z {:.3f})\n", label,
      format_double(emp.mean), format_double(exact.mean),
      se_mean > 0 ? (emp.mean - exact.mean) / se_mean : 0.0, format_double(emp.variance),
      format_double(exact.variance),
      se_var > 0 ? (emp.variance - exact.variance) / se_var : 0.0);
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(opt.config);
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);
  const std::size_t count = opt.paths.value_or(cfg.paths);
  const auto path = output_path(opt, cfg);
  std::ostream& report = path ? out : err;
  std::ostringstream csv;

  if (!cfg.forest_specs.empty()) {
    std::optional<Forest> forest;
    try {
      forest.emplace(build_forest(cfg.forest_specs, cfg.corr));
    } catch (const std::invalid_argument& e) {
      throw SpecError("forest.corr", e.what());
    }
    std::vector<std::vector<PathSample>> draws;
    draws.reserve(count);
    for (std::size_t i = 0; i < count; ++i) draws.push_back(sample_forest(*forest, seed, i));
    std::vector<std::function<double(double)>> quotes;
    for (const auto& s : cfg.forest_specs) {
      quotes.emplace_back([s](double x) { return quote(s, x); });
    }
    write_forest_csv(csv, draws, quotes);
    emit(path, csv.str(), out);
    if (opt.report && count >= 2) {
      for (std::size_t t = 0; t < forest->size(); ++t) {
        std::vector<PathSample> tree;
        tree.reserve(count);
        for (const auto& d : draws) tree.push_back(d[t]);
        report_moments(report, fmt::format("tree {}: ", t), cfg.forest_specs[t], tree);
      }
      if (cfg.knots.size() == forest->size()) {
        const auto basis = CurveBasis::natural_cubic(cfg.knots);
        const int n = forest->levels();
        Eigen::VectorXd mean_coeffs = Eigen::VectorXd::Zero(basis.size());
        for (const auto& d : draws) {
          for (std::size_t t = 0; t < d.size(); ++t) {
            mean_coeffs[static_cast<Eigen::Index>(t)] += quote(cfg.forest_specs[t], d[t].values[n]);
          }
        }
        mean_coeffs /= static_cast<double>(count);
        for (const double tau : cfg.knots) {
          report << "mean terminal curve at " << format_double(tau) << ": "
                 << format_double(curve_at(basis, mean_coeffs, tau)) << "\n";
        }
      }
    }
    return kOk;
  }

  const auto& spec = cfg.primary();
  const auto lat = build_lattice(make_moment_model(spec));
  const auto paths = sample_paths(lat, seed, count);
  write_paths_csv(csv, paths, [&](double x) { return quote(spec, x); });
  emit(path, csv.str(), out);
  if (opt.report && count >= 2) report_moments(report, "", spec, paths);
  return kOk;
}

// ---------------------------------------------------------------- price

void check_schedule(const RunConfig& cfg, int levels) {
  for (std::size_t i = 0; i < cfg.bond.coupons.size(); ++i) {
    const int j = cfg.bond.coupons[i].level;
    if (j < 0 || j > levels) {
      throw SpecError("schedules.coupons[" + std::to_string(i) + "].level",
                      "outside the lattice horizon");
    }
  }
  for (std::size_t i = 0; i < cfg.bond.calls.size(); ++i) {
    const int j = cfg.bond.calls[i].level;
    if (j < 0 || j > levels) {
      throw SpecError("schedules.calls[" + std::to_string(i) + "].level",
                      "outside the lattice horizon");
    }
  }
}

std::string region_json(const std::vector<NodeCoord>& region) {
  std::string s = "[";
  for (std::size_t i = 0; i < region.size(); ++i) {
    s += fmt::format("{}{{\"j\":{},\"k\":{}}}", i ? "," : "", region[i].j, region[i].k);
  }
  return s + "]";
}

int cmd_price(const std::string& kind, const Options& opt, std::ostream& out) {
  const auto cfg = load_config(opt.config);
  const auto& spec = cfg.primary();
  const auto lat = build_lattice(make_moment_model(spec));
  const auto disc = make_discount(cfg.discount, spec);
  std::string report;
  if (kind == "bullet" || kind == "callable") {
    check_schedule(cfg, spec.levels);
    auto bond = cfg.bond;
    if (kind == "bullet") bond.calls.clear();
    const auto r = price_callable_bond(lat, bond, disc);
    report = fmt::format(
        "{{\"bullet\":{},\"option\":{},\"callable\":{},\"levels\":{},\"exercise_region\":{}}}\n",
        format_double(r.bullet), format_double(r.option), format_double(r.callable),
        lat.levels(), region_json(r.exercise_region));
  } else {
    const auto payoff = make_payoff(cfg.payoff, spec);
    double price = 0.0;
    std::vector<NodeCoord> region;
    if (kind == "european") {
      price = price_european(lat, payoff, disc);
    } else {
      const auto r = price_american(lat, payoff, disc);
      price = r.price;
      region = r.exercise_region;
    }
    report = fmt::format("{{\"price\":{},\"levels\":{},\"exercise_region\":{}}}\n",
                         format_double(price), lat.levels(), region_json(region));
  }
  emit(output_path(opt, cfg), report, out);
  return kOk;
}

// --------------------------------------------------------------- verify

struct CheckLine {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

double moment_error(const Lattice& lat, const MomentModel& model, bool variance) {
  double worst = 0.0;
  for (int j = 0; j < lat.levels(); ++j) {
    for (int k = -j; k <= j; ++k) {
      const auto d = one_step_distribution(lat, j, k);
      const double e = variance ? std::abs(d.variance() - model.var[j])
                                : std::abs(d.mean() - lat.cond_mean(j, k));
      worst = std::max(worst, e);
    }
  }
  return worst;
}

double probability_error(const Lattice& lat) {
  double worst = 0.0;
  const auto outside = [](double p) { return p < 0.0 ? -p : (p > 1.0 ? p - 1.0 : 0.0); };
  for (int j = 0; j < lat.levels(); ++j) {
    const auto& c = lat.center_branches(j);
    worst = std::max({worst, std::abs(c.p_u + c.p_n + c.p_d - 1.0), outside(c.p_u),
                      outside(c.p_n), outside(c.p_d)});
    for (int k = -j; k <= j; ++k) {
      if (k != 0) worst = std::max(worst, outside(lat.spanning(j, k).p));
    }
  }
  return worst;
}

// Sign changes of f1 - f2 over the solver bracket on a uniform grid.
int grid_sign_changes(double m_self, double m_inner, double variance, int points) {
  const double s = std::sqrt(variance);
  const double side = m_self >= m_inner ? 1.0 : -1.0;
  int changes = 0;
  double prev = 0.0;
  for (int i = 0; i <= points; ++i) {
    const double x = m_self + side * s * i / points;
    const double g = branch_mean_ratio(x, m_self, m_inner) -
                     branch_variance_ratio(x, m_self, m_inner, variance);
    if (i > 0 && ((prev < 0.0 && g >= 0.0) || (prev > 0.0 && g <= 0.0))) ++changes;
    if (g != 0.0) prev = g;
  }
  return changes;
}

std::vector<CheckLine> verify_lattice(const Lattice& lat, const MomentModel& model,
                                      bool structural_only) {
  std::vector<CheckLine> lines;
  const long expected = static_cast<long>(model.levels() + 1) * (model.levels() + 1);
  lines.push_back({"node_count", static_cast<double>(std::abs(lat.node_count() - expected)), 0.0,
                   lat.node_count() == expected && lat.levels() == model.levels()});
  if (!lines.back().pass) return lines;
  const double closure = probability_error(lat);
  lines.push_back({"probability_closure", closure, 1e-12, closure <= 1e-12});
  double coherence = 0.0;
  for (int j = 0; j <= lat.levels(); ++j) {
    for (int k = -j; k <= j; ++k) {
      coherence = std::max(coherence,
                           std::abs(lat.cond_mean(j, k) - model.mean(j, lat.value(j, k))));
    }
  }
  lines.push_back({"cache_coherence", coherence, 1e-12, coherence <= 1e-12});
  const double mean_err = moment_error(lat, model, false);
  lines.push_back({"moment_matching_mean", mean_err, 1e-8, mean_err <= 1e-8});
  const double var_err = moment_error(lat, model, true);
  lines.push_back({"moment_matching_variance", var_err, 1e-8, var_err <= 1e-8});
  if (structural_only) return lines;

  // Grid scan on the innermost solves of every level.
  int worst_changes = 1;
  double worst_root = 0.0;
  for (int j = 1; j < lat.levels(); ++j) {
    for (const int k : {1, -1}) {
      const double ms = lat.cond_mean(j, k);
      const double mi = lat.cond_mean(j, 0);
      const auto& s = lat.spanning(j, k);
      if (s.degenerate) continue;
      const int changes = grid_sign_changes(ms, mi, model.var[j], 10000);
      if (changes != 1) worst_changes = changes;
      const double d = std::abs(ms - mi);
      const double u = 0.5 * (-d + std::sqrt(d * d + 4.0 * model.var[j]));
      worst_root = std::max(worst_root, std::abs(std::abs(s.x - ms) - u));
    }
  }
  lines.push_back({"root_uniqueness", static_cast<double>(std::abs(worst_changes - 1)), 0.0,
                   worst_changes == 1});
  lines.push_back({"root_accuracy", worst_root, 1e-6, worst_root <= 1e-6});
  return lines;
}

std::vector<CheckLine> verify_behaviour(const OUSpec& spec, const Lattice& lat,
                                        std::uint64_t seed) {
  std::vector<CheckLine> lines;
  constexpr std::size_t kPaths = 20000;
  const auto paths = sample_paths(lat, seed, kPaths);
  const auto emp = empirical_moments(paths, spec.levels);
  const auto exact = terminal_moments(spec, spec.levels);
  const double n = static_cast<double>(kPaths);
  const double z_mean = std::abs(emp.mean - exact.mean) / std::sqrt(exact.variance / n);
  const double z_var =
      std::abs(emp.variance - exact.variance) / (exact.variance * std::sqrt(2.0 / (n - 1.0)));
  lines.push_back({"sampling_mean_z", z_mean, 4.0, z_mean <= 4.0});
  lines.push_back({"sampling_variance_z", z_var, 4.0, z_var <= 4.0});

  PayoffSpec one{[](double) { return 1.0; }, {}, {}};
  const double closure = std::abs(price_european(lat, one, DiscountSpec::none()) - 1.0);
  lines.push_back({"pricing_closure", closure, 1e-12, closure <= 1e-12});

  const double strike = exact.mean;
  PayoffSpec put{[strike](double x) { return std::max(strike - x, 0.0); },
                 [strike](int, int, double x) { return std::max(strike - x, 0.0); },
                 {}};
  for (int j = 0; j <= spec.levels; ++j) put.exercise_levels.push_back(j);
  const auto disc = DiscountSpec::flat(0.05, spec.dt);
  const double gap = price_american(lat, put, disc).price - price_european(lat, put, disc);
  lines.push_back({"american_ge_european", std::max(0.0, -gap), 0.0, gap >= 0.0});
  return lines;
}

void print_lines(std::ostream& out, const std::vector<CheckLine>& lines) {
  for (const auto& l : lines) {
    out << fmt::format("{} {} measured={} tol={}\n", l.pass ? "PASS" : "FAIL", l.name,
                       format_double(l.measured), format_double(l.tolerance));
  }
}

void require_all(const std::vector<CheckLine>& lines) {
  for (const auto& l : lines) {
    if (!l.pass) throw VerifyFailure(l.name, l.name + " measured " + format_double(l.measured));
  }
}

int cmd_verify(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(opt.config);
  const auto& spec = cfg.primary();
  const auto model = make_moment_model(spec);
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);

  try {
    if (opt.lattice) {
      std::ifstream in(*opt.lattice);
      if (!in) throw SpecError("lattice", "cannot open '" + *opt.lattice + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      Lattice lat;
      try {
        lat = parse_lattice_json(buf.str());
      } catch (const std::exception& e) {
        throw VerifyFailure("lattice_schema", e.what());
      }
      const auto lines = verify_lattice(lat, model, true);
      print_lines(out, lines);
      require_all(lines);
    } else {
      const auto lat = build_lattice(model);
      auto lines = verify_lattice(lat, model, false);
      print_lines(out, lines);
      require_all(lines);
      lines = verify_behaviour(spec, lat, seed);
      print_lines(out, lines);
      require_all(lines);
      out << fmt::format("INFO order_violations count={}\n", lat.order_violations().size());
    }

    if (opt.sweep > 0) {
      std::mt19937_64 gen(seed);
      std::uniform_real_distribution<double> kappa(0.0, 2.0), sigma(0.001, 0.5),
          dt(0.05, 1.0), level(-1.0, 1.0);
      std::uniform_int_distribution<int> levels(1, 100);
      double worst_closure = 0.0, worst_mean = 0.0, worst_var = 0.0;
      for (std::size_t i = 0; i < opt.sweep; ++i) {
        OUSpec s;
        s.kappa = kappa(gen);
        s.sigma = Eigen::VectorXd::Constant(1, sigma(gen));
        s.dt = dt(gen);
        s.levels = levels(gen);
        s.theta = level(gen);
        s.x0 = level(gen);
        const auto m = make_moment_model(s);
        const auto l = build_lattice(m);
        worst_closure = std::max(worst_closure, probability_error(l));
        worst_mean = std::max(worst_mean, moment_error(l, m, false));
        worst_var = std::max(worst_var, moment_error(l, m, true));
      }
      const std::vector<CheckLine> lines{
          {"sweep_probability_closure", worst_closure, 1e-12, worst_closure <= 1e-12},
          {"sweep_moment_matching_mean", worst_mean, 1e-8, worst_mean <= 1e-8},
          {"sweep_moment_matching_variance", worst_var, 1e-8, worst_var <= 1e-8}};
      out << "sweep specs=" << opt.sweep << "\n";
      print_lines(out, lines);
      require_all(lines);
    }
  } catch (const VerifyFailure& f) {
    err << "verification failed: " << f.name << " (" << f.what() << ")\n";
    return kVerifyFailed;
  }
  out << "all checks passed\n";
  return kOk;
}

}  // namespace

void write_atomically(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw SpecError("out", "cannot write '" + tmp.string() + "'");
    f << contents;
    if (!f.flush()) throw SpecError("out", "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recombination trinomial trees for Ornstein-Uhlenbeck processes"};
  app.require_subcommand(1);
  Options opt;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Run configuration (JSON)")->required();
    sub->add_option("--out", opt.out, "Output file (default: stdout)");
    sub->add_option("--seed", opt.seed, "RNG seed (overrides config)");
  };

  auto* build = app.add_subcommand("build", "Build a lattice and export it");
  common(build);
  build->add_option("--format", opt.format, "json, dot or csv")
      ->check(CLI::IsMember({"json", "dot", "csv"}));
  build->add_flag("--strict", opt.strict, "Fail when node values are not increasing in k");

  auto* simulate = app.add_subcommand("simulate", "Sample paths through the lattice or forest");
  common(simulate);
  simulate->add_option("--paths", opt.paths, "Number of paths (overrides config)");
  simulate->add_flag("--report", opt.report, "Print terminal moments against the exact ones");

  auto* price = app.add_subcommand("price", "Backward-induction pricing");
  price->require_subcommand(1);
  std::string price_kind;
  for (const char* kind : {"bullet", "european", "american", "callable"}) {
    auto* sub = price->add_subcommand(kind);
    common(sub);
    sub->callback([&price_kind, kind] { price_kind = kind; });
  }

  auto* verify = app.add_subcommand("verify", "Check lattice invariants for the configured spec");
  common(verify);
  verify->add_option("--lattice", opt.lattice, "Verify an exported lattice JSON instead");
  verify->add_option("--sweep", opt.sweep, "Also run a randomized sweep over N specs");
  verify->add_flag("--report", opt.report, "Accepted for symmetry; checks always print");

  std::vector<std::string> argv_store{"recomb"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (build->parsed()) return cmd_build(opt, out, err);
    if (simulate->parsed()) return cmd_simulate(opt, out, err);
    if (price->parsed()) return cmd_price(price_kind, opt, out);
    if (verify->parsed()) return cmd_verify(opt, out, err);
  } catch (const SpecError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const PricingError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const LatticeError& e) {
    err << "build error: " << e.what() << "\n";
    return kBuildError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace recomb::cli
