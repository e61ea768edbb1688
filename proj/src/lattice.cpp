#include "recomb/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace recomb {
namespace {

constexpr int kMaxBisection = 200;
constexpr double kDegenerateTol = 1e-14;

std::string coord_text(NodeCoord n) {
  return "node (" + std::to_string(n.j) + ", " + std::to_string(n.k) + ")";
}

// Up-case solve: m_self > m_inner, root in [m_self, m_self + sqrt(V)].
BranchSolve solve_above(double m_self, double m_inner, double variance) {
  const auto gap = [&](double x) {
    return branch_mean_ratio(x, m_self, m_inner) -
           branch_variance_ratio(x, m_self, m_inner, variance);
  };
  double lo = m_self;
  double hi = m_self + std::sqrt(variance);
  BranchSolve out;
  // gap(lo) < 0 < gap(hi); bisect down to adjacent doubles.
  for (out.iterations = 0; out.iterations < kMaxBisection; ++out.iterations) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double g = gap(mid);
    if (!std::isfinite(g)) {
      throw std::runtime_error("branch equation produced a non-finite residual");
    }
    if (g < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (out.iterations == kMaxBisection) {
    throw std::runtime_error("branch equation bisection did not converge");
  }
  out.x = std::abs(gap(lo)) < std::abs(gap(hi)) ? lo : hi;
  out.p = std::clamp(branch_mean_ratio(out.x, m_self, m_inner), 0.0, 1.0);
  return out;
}

}  // namespace

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::center:
      return "center";
    case NodeKind::spanning_above:
      return "spanning_above";
    case NodeKind::spanning_below:
      return "spanning_below";
  }
  return "?";
}

LatticeError::LatticeError(NodeCoord node, const std::string& message)
    : std::runtime_error(coord_text(node) + ": " + message), node_(node) {}

Lattice::Lattice(std::vector<LatticeLevel> levels) : levels_(std::move(levels)) {
  if (levels_.size() < 2) throw std::invalid_argument("lattice needs at least one step");
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const auto width = static_cast<Eigen::Index>(2 * j + 1);
    const auto& lv = levels_[j];
    if (lv.values.size() != width || lv.cond_means.size() != width) {
      throw LatticeError({static_cast<int>(j), 0}, "level must hold 2j+1 nodes");
    }
    const bool terminal = j + 1 == levels_.size();
    if (!terminal && lv.spanning.size() != static_cast<std::size_t>(width)) {
      throw LatticeError({static_cast<int>(j), 0}, "missing spanning solves");
    }
  }
}

const LatticeLevel& Lattice::at(int j) const {
  if (j < 0 || j > levels()) {
    throw std::out_of_range("level " + std::to_string(j) + " outside lattice");
  }
  return levels_[j];
}

long Lattice::node_count() const {
  long n = 0;
  for (const auto& lv : levels_) n += lv.values.size();
  return n;
}

bool Lattice::contains(int j, int k) const {
  return j >= 0 && j <= levels() && std::abs(k) <= j;
}

LatticeNode Lattice::node(int j, int k) const {
  if (!contains(j, k)) throw std::out_of_range(coord_text({j, k}) + " outside lattice");
  const auto kind = k == 0  ? NodeKind::center
                    : k > 0 ? NodeKind::spanning_above
                            : NodeKind::spanning_below;
  return {j, k, value(j, k), cond_mean(j, k), kind};
}

const CenterBranches& Lattice::center_branches(int j) const {
  if (j < 0 || j >= levels()) {
    throw std::out_of_range("no center branches at level " + std::to_string(j));
  }
  return levels_[j].center;
}

const BranchSolve& Lattice::spanning(int j, int k) const {
  if (k == 0 || !contains(j, k) || j == levels()) {
    throw std::out_of_range("no spanning branch at " + coord_text({j, k}));
  }
  return levels_[j].spanning[k + j];
}

std::vector<NodeCoord> Lattice::order_violations() const {
  std::vector<NodeCoord> bad;
  for (int j = 0; j <= levels(); ++j) {
    const auto& v = levels_[j].values;
    for (Eigen::Index i = 0; i + 1 < v.size(); ++i) {
      if (!(v[i] < v[i + 1])) bad.push_back({j, static_cast<int>(i) - j});
    }
  }
  return bad;
}

CenterStep center_step(double mean, double variance) {
  if (!std::isfinite(mean) || !std::isfinite(variance)) {
    throw std::domain_error("non-finite conditional moments");
  }
  if (variance <= 0.0) throw std::domain_error("conditional variance must be > 0");
  const double sd = std::sqrt(variance);
  CenterStep step;
  step.dx = std::sqrt(3.0 * variance);
  step.center = std::round(mean / step.dx) * step.dx;  // half away from zero
  const double eta = mean - step.center;
  const double quad = eta * eta / variance;
  const double lin = eta / (2.0 * std::sqrt(3.0) * sd);
  step.branches.p_u = 1.0 / 6.0 + quad / 6.0 + lin;
  step.branches.p_n = 2.0 / 3.0 - quad / 3.0;
  step.branches.p_d = 1.0 / 6.0 + quad / 6.0 - lin;
  step.branches.eta = eta;
  return step;
}

CenterPath build_center_path(const MomentModel& model) {
  const int n = model.levels();
  if (n < 1) throw std::invalid_argument("model must have at least one level");
  CenterPath path;
  path.values.resize(n + 1);
  path.dx = Eigen::VectorXd::Zero(n + 1);
  path.branches.resize(n);
  path.values[0] = model.initial;
  for (int j = 0; j < n; ++j) {
    const auto step = center_step(model.mean(j, path.values[j]), model.var[j]);
    path.values[j + 1] = step.center;
    path.dx[j + 1] = step.dx;
    path.branches[j] = step.branches;
  }
  return path;
}

double branch_mean_ratio(double x, double m_self, double m_inner) {
  return (x - m_self) / (x - m_inner);
}

double branch_variance_ratio(double x, double m_self, double m_inner,
                             double variance) {
  // V - u^2 in factored form so the denominator never drops below d^2.
  const double sd = std::sqrt(variance);
  const double u = std::abs(x - m_self);
  const double rest = (sd - u) * (sd + u);
  const double d = m_inner - m_self;
  return rest / (rest + d * d);
}

BranchSolve solve_branch_equation(double m_self, double m_inner, double variance,
                                  int outward) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::domain_error("branch variance must be finite and > 0");
  }
  if (!std::isfinite(m_self) || !std::isfinite(m_inner)) {
    throw std::domain_error("branch means must be finite");
  }
  const double gap = m_self - m_inner;
  if (std::abs(gap) < kDegenerateTol * std::max(1.0, std::abs(m_self))) {
    // f1 == f2 == 1: the inner node alone already matches both moments.
    BranchSolve out;
    out.degenerate = true;
    out.p = 1.0;
    const int side = outward != 0 ? outward : (gap >= 0.0 ? 1 : -1);
    out.x = m_self + side * std::sqrt(variance);
    return out;
  }
  if (gap > 0.0) return solve_above(m_self, m_inner, variance);
  auto out = solve_above(-m_self, -m_inner, variance);
  out.x = -out.x;
  return out;
}

Lattice build_lattice(const MomentModel& model, const BuildOptions& options) {
  const int n = model.levels();
  if (n < 1) throw std::invalid_argument("model must have at least one level");

  std::vector<LatticeLevel> levels(n + 1);
  levels[0].values = Eigen::VectorXd::Constant(1, model.initial);

  for (int j = 0; j <= n; ++j) {
    auto& cur = levels[j];
    cur.cond_means.resize(cur.values.size());
    // The terminal level caches M too; mean_fn must accept j == levels.
    for (Eigen::Index i = 0; i < cur.values.size(); ++i) {
      cur.cond_means[i] = model.mean(j, cur.values[i]);
      if (!std::isfinite(cur.cond_means[i])) {
        throw LatticeError({j, static_cast<int>(i) - j}, "non-finite conditional mean");
      }
    }
    if (j == n) break;
    const double variance = model.var[j];

    auto& next = levels[j + 1];
    next.values.resize(2 * j + 3);
    const auto step = center_step(cur.cond_means[j], variance);
    cur.center = step.branches;
    next.dx = step.dx;
    const int c = j + 1;  // center index at level j + 1
    next.values[c] = step.center;
    next.values[c + 1] = step.center + step.dx;
    next.values[c - 1] = step.center - step.dx;

    cur.spanning.assign(2 * j + 1, BranchSolve{});
    for (int k = 1; k <= j; ++k) {
      for (const int side : {1, -1}) {
        const int self = j + side * k;
        const int inner = j + side * (k - 1);
        BranchSolve solve;
        try {
          solve = solve_branch_equation(cur.cond_means[self], cur.cond_means[inner], variance,
                                        side);
        } catch (const std::runtime_error& e) {
          throw LatticeError({j, side * k}, e.what());
        }
        next.values[c + side * (k + 1)] = solve.x;
        cur.spanning[self] = solve;
      }
    }
  }

  Lattice lat(std::move(levels));
  if (options.strict_ordering) {
    const auto bad = lat.order_violations();
    if (!bad.empty()) {
      throw LatticeError(bad.front(), "node values not strictly increasing in k");
    }
  }
  return lat;
}

double StepDistribution::mean() const { return probs.dot(values); }

double StepDistribution::variance() const {
  const double m = mean();
  return probs.dot((values.array() - m).square().matrix());
}

StepDistribution one_step_distribution(const Lattice& lat, int j, int k) {
  if (!lat.contains(j, k) || j == lat.levels()) {
    throw std::out_of_range("no step distribution at " + coord_text({j, k}));
  }
  std::vector<std::pair<int, double>> mass;
  mass.reserve(std::abs(k) + 3);
  const int side = k > 0 ? 1 : -1;
  double weight = 1.0;
  // Walk the sibling chain toward the center; each hop keeps p of the mass.
  for (int m = k; m != 0; m -= side) {
    const auto& s = lat.spanning(j, m);
    mass.emplace_back(m + side, weight * (1.0 - s.p));
    weight *= s.p;
  }
  const auto& c = lat.center_branches(j);
  mass.emplace_back(-1, weight * c.p_d);
  mass.emplace_back(0, weight * c.p_n);
  mass.emplace_back(1, weight * c.p_u);

  std::sort(mass.begin(), mass.end(), [&](const auto& a, const auto& b) {
    const double va = lat.value(j + 1, a.first);
    const double vb = lat.value(j + 1, b.first);
    return va < vb || (va == vb && a.first < b.first);
  });

  StepDistribution dist;
  dist.offsets.reserve(mass.size());
  dist.values.resize(static_cast<Eigen::Index>(mass.size()));
  dist.probs.resize(static_cast<Eigen::Index>(mass.size()));
  for (std::size_t i = 0; i < mass.size(); ++i) {
    dist.offsets.push_back(mass[i].first);
    dist.values[static_cast<Eigen::Index>(i)] = lat.value(j + 1, mass[i].first);
    dist.probs[static_cast<Eigen::Index>(i)] = mass[i].second;
  }
  return dist;
}

}  // namespace recomb
