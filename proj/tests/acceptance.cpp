// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "recomb/cli/commands.hpp"
#include "recomb/lattice.hpp"
#include "recomb/price.hpp"
#include "recomb/simulate.hpp"

namespace {

using namespace recomb;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
  if (!pass) ++failures;
}

void info(const std::string& text) { fmt::print("  INFO {}\n", text); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

OUSpec make_spec(double kappa, double theta, double sigma, double x0, double dt, int levels) {
  OUSpec s;
  s.kappa = kappa;
  s.theta = theta;
  s.sigma = Eigen::VectorXd::Constant(1, sigma);
  s.x0 = x0;
  s.dt = dt;
  s.levels = levels;
  return s;
}

std::vector<OUSpec> random_specs(int count, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> kappa(0.0, 2.0), sigma(0.001, 0.5), dt(0.05, 1.0),
      level(-1.0, 1.0);
  std::uniform_int_distribution<int> levels(1, 100);
  std::vector<OUSpec> out;
  for (int i = 0; i < count; ++i) {
    const double k = kappa(gen), s = sigma(gen), d = dt(gen);
    const int n = levels(gen);
    const double th = level(gen), x0 = level(gen);
    out.push_back(make_spec(k, th, s, x0, d, n));
  }
  return out;
}

// ------------------------------------------------------------------ sweep

void closure_and_moments() {
  const auto specs = random_specs(1000, 2024);
  std::vector<Lattice> lattices;
  lattices.reserve(specs.size());
  double worst_sum = 0.0, worst_range = 0.0;
  const auto outside = [](double p) { return p < 0.0 ? -p : (p > 1.0 ? p - 1.0 : 0.0); };

  const auto t0 = Clock::now();
  for (const auto& spec : specs) {
    lattices.push_back(build_lattice(make_moment_model(spec)));
    const auto& lat = lattices.back();
    for (int j = 0; j < lat.levels(); ++j) {
      const auto& c = lat.center_branches(j);
      worst_sum = std::max(worst_sum, std::abs(c.p_u + c.p_n + c.p_d - 1.0));
      worst_range = std::max({worst_range, outside(c.p_u), outside(c.p_n), outside(c.p_d)});
      for (int k = -j; k <= j; ++k) {
        if (k != 0) {
          const double p = lat.spanning(j, k).p;
          worst_sum = std::max(worst_sum, std::abs(p + (1.0 - p) - 1.0));
          worst_range = std::max(worst_range, outside(p));
        }
        const auto d = one_step_distribution(lat, j, k);
        worst_sum = std::max(worst_sum, std::abs(d.probs.sum() - 1.0));
        worst_range = std::max(worst_range, outside(d.probs.minCoeff()));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  report(worst_sum <= 1e-12 && worst_range == 0.0 && elapsed < 60.0, "probability_closure",
         fmt::format("1000 specs, max |sum-1| = {:.3e} (tol 1e-12), max range excess = {:.3e}, "
                     "{:.2f} s (limit 60 s)",
                     worst_sum, worst_range, elapsed));

  double worst_mean = 0.0, worst_var = 0.0;
  long nodes = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& lat = lattices[i];
    const auto model = make_moment_model(specs[i]);
    for (int j = 0; j < lat.levels(); ++j) {
      for (int k = -j; k <= j; ++k) {
        const auto d = one_step_distribution(lat, j, k);
        worst_mean = std::max(worst_mean, std::abs(d.mean() - model.mean(j, lat.value(j, k))));
        worst_var = std::max(worst_var, std::abs(d.variance() - model.var[j]));
        ++nodes;
      }
    }
  }
  report(worst_mean <= 1e-8 && worst_var <= 1e-8, "moment_matching",
         fmt::format("{} nodes, max mean error {:.3e}, max variance error {:.3e} (tol 1e-8)",
                     nodes, worst_mean, worst_var));

  long violations = 0;
  int affected = 0;
  for (const auto& lat : lattices) {
    const auto n = lat.order_violations().size();
    violations += static_cast<long>(n);
    affected += n > 0;
  }
  info(fmt::format("node ordering: {} of 1000 sweep lattices have non-increasing values in k "
                   "({} adjacent pairs)",
                   affected, violations));
}

// --------------------------------------------------------- root uniqueness

void root_uniqueness() {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> mean(-1.0, 1.0), log_var(-8.0, 0.0);
  int multiple = 0;
  double worst = 0.0, worst_closed = 0.0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    double ms = mean(gen), mi = mean(gen);
    while (std::abs(ms - mi) < 1e-6) mi = mean(gen);
    const double v = std::pow(10.0, log_var(gen));
    const auto grid = oracle::grid_scan(ms, mi, v, 1'000'000);
    if (grid.sign_changes != 1) ++multiple;
    const auto solve = solve_branch_equation(ms, mi, v);
    worst = std::max(worst, std::abs(solve.x - grid.root));
    worst_closed = std::max(worst_closed, std::abs(solve.x - oracle::quadratic_root(ms, mi, v)));
  }
  report(multiple == 0 && worst <= 1e-6, "root_uniqueness",
         fmt::format("1000 triples x 1e6 grid points: {} without exactly one sign change, "
                     "max |solver - grid root| = {:.3e} (tol 1e-6), {:.1f} s",
                     multiple, worst, seconds_since(t0)));
  info(fmt::format("max |solver - closed-form root| = {:.3e}", worst_closed));
}

// ------------------------------------------------------------------- size

double best_build_seconds(const OUSpec& spec, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    const auto lat = build_lattice(make_moment_model(spec));
    best = std::min(best, seconds_since(t0));
    if (lat.node_count() <= 0) best = 1e300;
  }
  return best;
}

void size_and_complexity() {
  bool counts_ok = true;
  std::string counts;
  for (const int n : {1, 10, 100, 500}) {
    const auto lat = build_lattice(make_moment_model(make_spec(0.3, 0.0, 0.1, 0.0, 0.05, n)));
    const long expected = static_cast<long>(n + 1) * (n + 1);
    counts_ok = counts_ok && lat.node_count() == expected;
    counts += fmt::format("N={}:{}/{} ", n, lat.node_count(), expected);
  }
  const double t500 = best_build_seconds(make_spec(0.3, 0.0, 0.1, 0.0, 0.05, 500), 5);
  const double t1000 = best_build_seconds(make_spec(0.3, 0.0, 0.1, 0.0, 0.05, 1000), 5);
  const double ratio = t1000 / t500;
  report(counts_ok && ratio <= 5.0, "size_complexity",
         fmt::format("{}; build N=1000 {:.4f} s vs N=500 {:.4f} s, ratio {:.2f} (limit 5)",
                     counts, t1000, t500, ratio));
}

// --------------------------------------------------------------- sampling

void sampling_consistency() {
  const auto t0 = Clock::now();
  const auto spec = make_spec(0.0, 0.0, 0.1, 0.2, 0.1, 50);
  const auto lat = build_lattice(make_moment_model(spec));
  constexpr std::size_t kPaths = 100'000;
  const auto paths = sample_paths(lat, 42, kPaths);
  const auto emp = empirical_moments(paths, spec.levels);
  const auto exact = terminal_moments(spec, spec.levels);
  const double n = static_cast<double>(kPaths);
  const double z_mean = (emp.mean - exact.mean) / std::sqrt(exact.variance / n);
  const double z_var = (emp.variance - exact.variance) / (exact.variance * std::sqrt(2.0 / (n - 1)));

  const auto lat2 = build_lattice(make_moment_model(make_spec(0.6, 0.0, 0.1, 0.25, 0.5, 40)));
  const int j = 30, k = 17;
  const auto dist = one_step_distribution(lat2, j, k);
  constexpr long kDraws = 1'000'000;
  std::map<int, long> counts;
  for (long i = 0; i < kDraws; ++i) {
    ++counts[walk_step(lat2, j, k, CounterRng(7, static_cast<std::uint64_t>(i)))];
  }
  double worst_z = 0.0;
  long stray = 0;
  for (const auto& [off, c] : counts) {
    if (std::find(dist.offsets.begin(), dist.offsets.end(), off) == dist.offsets.end()) stray += c;
  }
  for (std::size_t i = 0; i < dist.offsets.size(); ++i) {
    const double p = dist.probs[static_cast<Eigen::Index>(i)];
    const double se = std::sqrt(p * (1.0 - p) / kDraws);
    const double freq = static_cast<double>(counts[dist.offsets[i]]) / kDraws;
    if (se > 0.0) worst_z = std::max(worst_z, std::abs(freq - p) / se);
  }
  const double elapsed = seconds_since(t0);
  report(std::abs(z_mean) <= 4.0 && std::abs(z_var) <= 4.0 && worst_z <= 4.0 && stray == 0 &&
             elapsed < 120.0,
         "sampling_consistency",
         fmt::format("100k paths: terminal mean z = {:.2f}, variance z = {:.2f}; 1e6 draws from "
                     "node ({}, {}) over {} outcomes: max |z| = {:.2f}, stray = {}; {:.1f} s "
                     "(limit 120 s)",
                     z_mean, z_var, j, k, dist.offsets.size(), worst_z, stray, elapsed));
}

// ---------------------------------------------------------------- pricing

// Fixed horizon refined by levels; strike at mean + moneyness * sd.
double call_error(const OUSpec& base, double horizon, int levels, double moneyness) {
  auto spec = base;
  spec.levels = levels;
  spec.dt = horizon / levels;
  const auto m = terminal_moments(spec, levels);
  const double strike = m.mean + moneyness * std::sqrt(m.variance);
  PayoffSpec call;
  call.terminal = [strike](double x) { return std::max(x - strike, 0.0); };
  const double lattice =
      price_european(build_lattice(make_moment_model(spec)), call, DiscountSpec::none());
  const double exact = oracle::gaussian_call(m.mean, m.variance, strike);
  return std::abs(lattice - exact) / exact;
}

void pricing_convergence() {
  const auto base = make_spec(0.5, 0.03, 0.01, 0.05, 0.0, 0);
  const double fine = call_error(base, 1.0, 200, 0.0);
  const double coarse = call_error(base, 1.0, 25, 0.0);
  report(fine <= 0.01 && fine < coarse, "pricing_convergence",
         fmt::format("kappa=0.5 theta=0.03 sigma=0.01 x0=0.05 T=1, at-the-money call: "
                     "rel. error {:.3e} at 200 levels (tol 1e-2), {:.3e} at 25 levels",
                     fine, coarse));
  for (const double mny : {0.5, 1.0}) {
    info(fmt::format("strike mean+{}sd: rel. error {:.3e} at 25, {:.3e} at 200 levels", mny,
                     call_error(base, 1.0, 25, mny), call_error(base, 1.0, 200, mny)));
  }
  for (const double kappa : {0.0, 2.0}) {
    auto spec = base;
    spec.kappa = kappa;
    info(fmt::format("kappa={} at the money: rel. error {:.3e} at 25, {:.3e} at 200 levels",
                     kappa, call_error(spec, 1.0, 25, 0.0), call_error(spec, 1.0, 200, 0.0)));
  }
}

// --------------------------------------------------------------- ordering

void ordering_properties() {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> kappa(0.0, 2.0), sigma(0.01, 0.3), level(-0.5, 0.5),
      rate(0.0, 0.08);
  std::uniform_int_distribution<int> levels(1, 80);
  double worst_gap = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = levels(gen);
    const double dt = 0.1;
    const auto spec = make_spec(kappa(gen), level(gen), sigma(gen), level(gen), dt, n);
    const auto lat = build_lattice(make_moment_model(spec));
    const double strike = level(gen);
    const bool is_call = i % 2 == 0;
    PayoffSpec p;
    p.terminal = [=](double x) { return std::max(is_call ? x - strike : strike - x, 0.0); };
    p.exercise = [f = p.terminal](int, int, double x) { return f(x); };
    for (int j = 0; j <= n; ++j) p.exercise_levels.push_back(j);
    const auto disc = DiscountSpec::flat(rate(gen), dt);
    worst_gap = std::min(worst_gap, price_american(lat, p, disc).price -
                                        price_european(lat, p, disc));
  }

  std::uniform_real_distribution<double> short_rate(0.03, 0.07), call_price(95.0, 105.0);
  int identity_breaks = 0, bound_breaks = 0, empty_breaks = 0, with_value = 0;
  for (int i = 0; i < 100; ++i) {
    const int n = 12;
    const auto spec = make_spec(0.4, short_rate(gen), 0.004, short_rate(gen), 0.5, n);
    const auto lat = build_lattice(make_moment_model(spec));
    const auto disc = DiscountSpec::short_rate(0.5);
    BondSpec bond;
    for (int j = 1; j <= n; ++j) bond.coupons.push_back({j, 2.5});
    const auto plain = price_callable_bond(lat, bond, disc);
    empty_breaks += !(plain.callable == plain.bullet && plain.option == 0.0);
    std::uniform_int_distribution<int> when(0, n);
    for (int c = 0; c < 3; ++c) bond.calls.push_back({when(gen), call_price(gen)});
    const auto r = price_callable_bond(lat, bond, disc);
    identity_breaks += r.callable != r.bullet - r.option;
    bound_breaks += !(r.callable <= r.bullet);
    with_value += r.option > 0.0;
  }
  report(worst_gap >= 0.0 && identity_breaks == 0 && bound_breaks == 0 && empty_breaks == 0,
         "ordering_properties",
         fmt::format("100 specs: min(american - european) = {:.3e}; 100 bonds: identity breaks "
                     "{}, callable > bullet {}, empty-schedule mismatches {} ({} with option "
                     "value > 0)",
                     worst_gap, identity_breaks, bound_breaks, empty_breaks, with_value));
}

// ----------------------------------------------------------------- forest

void forest_marginals() {
  const std::vector<OUSpec> specs{make_spec(0.3, 0.02, 0.01, 0.03, 0.25, 20),
                                  make_spec(0.8, 0.04, 0.02, 0.01, 0.25, 20),
                                  make_spec(0.0, 0.00, 0.05, 0.00, 0.25, 20)};
  constexpr std::size_t kPaths = 100'000;
  const auto moments = [&](const Eigen::MatrixXd& corr, std::uint64_t seed) {
    const auto forest = build_forest(specs, corr);
    std::vector<std::vector<PathSample>> trees(specs.size());
    for (std::size_t i = 0; i < kPaths; ++i) {
      auto draw = sample_forest(forest, seed, i);
      for (std::size_t t = 0; t < draw.size(); ++t) trees[t].push_back(std::move(draw[t]));
    }
    std::vector<Moments> out;
    for (const auto& paths : trees) out.push_back(empirical_moments(paths, 20));
    return out;
  };
  const auto independent = moments(Eigen::MatrixXd::Identity(3, 3), 1001);
  Eigen::MatrixXd full(3, 3), singular(3, 3);
  full << 1.0, 0.7, 0.4, 0.7, 1.0, 0.6, 0.4, 0.6, 1.0;
  singular << 1.0, 1.0, -0.5, 1.0, 1.0, -0.5, -0.5, -0.5, 1.0;
  const double n = static_cast<double>(kPaths);
  double worst = 0.0;
  for (const auto& [label, corr] :
       {std::pair<const char*, Eigen::MatrixXd>{"full-rank", full}, {"singular", singular}}) {
    const auto correlated = moments(corr, 2002);
    for (std::size_t t = 0; t < specs.size(); ++t) {
      const double v = terminal_moments(specs[t], 20).variance;
      const double se_mean = std::sqrt(2.0 * v / n);
      const double se_var = v * std::sqrt(2.0 * 2.0 / (n - 1));
      const double zm = (correlated[t].mean - independent[t].mean) / se_mean;
      const double zv = (correlated[t].variance - independent[t].variance) / se_var;
      worst = std::max({worst, std::abs(zm), std::abs(zv)});
      info(fmt::format("{} tree {}: mean z {:.2f}, variance z {:.2f}", label, t, zm, zv));
    }
  }
  report(worst <= 4.0, "forest_marginals",
         fmt::format("3 trees, 100k paths per run, full-rank and singular correlation vs "
                     "identity: max |z| = {:.2f} (tol 4)",
                     worst));
}

// ------------------------------------------------------------ determinism

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism() {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "recomb_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = (dir / "config.json").string();
  std::ofstream(cfg) << R"({
  "process": {"kappa": 0.4, "theta": 0.04, "sigma": 0.006, "x0": 0.03, "dt": 0.5, "levels": 20},
  "forest": {"specs": [
      {"kappa": 0.4, "theta": 0.04, "sigma": 0.006, "x0": 0.03, "dt": 0.5, "levels": 20},
      {"kappa": 0.9, "theta": 0.05, "sigma": 0.010, "x0": 0.04, "dt": 0.5, "levels": 20}],
    "corr": [[1.0, 0.6], [0.6, 1.0]]},
  "payoff": {"kind": "put", "strike": 0.04, "exercise_levels": "all"},
  "discount": {"kind": "short_rate"},
  "schedules": {"coupons": [{"level": 4, "amount": 2.0}, {"level": 8, "amount": 2.0},
                            {"level": 12, "amount": 2.0}, {"level": 16, "amount": 2.0},
                            {"level": 20, "amount": 2.0}],
                "calls": [{"level": 8, "price": 100.0}, {"level": 12, "price": 100.0}]},
  "seed": 123,
  "paths": 2000
})";
  std::ofstream(dir / "single.json") << R"({
  "process": {"kappa": 0.4, "theta": 0.04, "sigma": 0.006, "x0": 0.03, "dt": 0.5, "levels": 20},
  "seed": 123, "paths": 2000
})";
  const auto run_to = [&](std::vector<std::string> args, const std::string& file) {
    std::ostringstream out, err;
    args.push_back("--out");
    args.push_back((dir / file).string());
    return recomb::cli::run(args, out, err) == recomb::cli::kOk;
  };
  bool ran = true;
  std::vector<std::string> mismatched;
  const auto twice = [&](const std::vector<std::string>& args, const std::string& stem) {
    ran = run_to(args, stem + "_1") && ran;
    ran = run_to(args, stem + "_2") && ran;
    const auto a = slurp(dir / (stem + "_1")), b = slurp(dir / (stem + "_2"));
    if (a.empty() || a != b) mismatched.push_back(stem);
  };
  const auto single = (dir / "single.json").string();
  twice({"simulate", "--config", single}, "paths.csv");
  twice({"simulate", "--config", cfg}, "forest.csv");
  twice({"price", "european", "--config", cfg}, "european.json");
  twice({"price", "american", "--config", cfg}, "american.json");
  twice({"price", "bullet", "--config", cfg}, "bullet.json");
  twice({"price", "callable", "--config", cfg}, "callable.json");
  report(ran && mismatched.empty(), "determinism",
         fmt::format("6 artifacts (path CSV, forest CSV, 4 pricing reports) generated twice: "
                     "{} mismatched{}",
                     mismatched.size(), ran ? "" : ", some runs failed"));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<const char*, std::function<void()>>> suites{
      {"probability closure / moment matching", closure_and_moments},
      {"root uniqueness", root_uniqueness},
      {"size / complexity", size_and_complexity},
      {"sampling consistency", sampling_consistency},
      {"pricing convergence", pricing_convergence},
      {"ordering properties", ordering_properties},
      {"forest marginals", forest_marginals},
      {"determinism", determinism}};
  for (const auto& [name, fn] : suites) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, fmt::format("threw: {}", e.what()));
    }
  }
  fmt::print("{} failing criteria; total {:.1f} s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
