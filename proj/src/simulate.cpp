#include "recomb/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "recomb/lattice_io.hpp"

namespace recomb {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Tolerance for unit diagonal, symmetry and semi-definite pivots.
constexpr double kCorrTol = 1e-10;

}  // namespace

double CounterRng::uniform(std::uint64_t level, std::uint64_t counter) const {
  std::uint64_t h = splitmix(seed_);
  h = splitmix(h ^ path_);
  h = splitmix(h ^ level);
  h = splitmix(h ^ counter);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t level, std::uint64_t counter) const {
  const double u1 = uniform(level, 2 * counter);
  const double u2 = uniform(level, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int walk_step(const Lattice& lat, int j, int k, const CounterRng& rng) {
  std::uint64_t draw = 0;
  while (k != 0) {
    const int side = k > 0 ? 1 : -1;
    if (rng.uniform(j, draw++) < lat.spanning(j, k).p) {
      k -= side;  // sibling hop, same epoch
    } else {
      return k + side;  // the single time transition
    }
  }
  const auto& c = lat.center_branches(j);
  const double u = rng.uniform(j, draw);
  return u < c.p_d ? -1 : (u < c.p_d + c.p_n ? 0 : 1);
}

PathSample sample_path(const Lattice& lat, std::uint64_t seed, std::uint64_t path_id) {
  const CounterRng rng(seed, path_id);
  const int n = lat.levels();
  PathSample path;
  path.seed = seed;
  path.path_id = path_id;
  path.offsets.assign(n + 1, 0);
  path.values.resize(n + 1);
  path.values[0] = lat.value(0, 0);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    k = walk_step(lat, j, k, rng);
    path.offsets[j + 1] = k;
    path.values[j + 1] = lat.value(j + 1, k);
  }
  return path;
}

std::vector<PathSample> sample_paths(const Lattice& lat, std::uint64_t seed,
                                     std::size_t count) {
  std::vector<PathSample> paths;
  paths.reserve(count);
  for (std::size_t i = 0; i < count; ++i) paths.push_back(sample_path(lat, seed, i));
  return paths;
}

int draw_next_offset(const Lattice& lat, int j, int k, double u) {
  const auto dist = one_step_distribution(lat, j, k);
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
    cumulative += dist.probs[i];
    if (u < cumulative) return dist.offsets[static_cast<std::size_t>(i)];
  }
  // Rounding left u above the last partial sum: take the last atom with mass.
  for (Eigen::Index i = dist.probs.size() - 1; i >= 0; --i) {
    if (dist.probs[i] > 0.0) return dist.offsets[static_cast<std::size_t>(i)];
  }
  return dist.offsets.back();
}

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr) {
  const Eigen::Index n = corr.rows();
  if (n == 0 || corr.cols() != n) {
    throw std::invalid_argument("correlation matrix must be square and non-empty");
  }
  if (!corr.allFinite()) throw std::invalid_argument("correlation matrix is not finite");
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > kCorrTol) {
    throw std::invalid_argument("correlation matrix is not symmetric");
  }
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > kCorrTol) {
    throw std::invalid_argument("correlation matrix must have a unit diagonal");
  }
  // Cholesky that tolerates zero pivots, so singular (e.g. all-ones) inputs
  // factor exactly.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double pivot = corr(c, c) - L.row(c).head(c).squaredNorm();
    if (pivot < -kCorrTol) {
      throw std::invalid_argument(
          fmt::format("correlation matrix is not positive semi-definite (pivot {} = {})",
                      c, pivot));
    }
    if (pivot <= kCorrTol) continue;
    const double d = std::sqrt(pivot);
    L(c, c) = d;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      L(r, c) = (corr(r, c) - L.row(r).head(c).dot(L.row(c).head(c))) / d;
    }
  }
  if (((L * L.transpose()) - corr).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("correlation matrix is not positive semi-definite");
  }
  return L;
}

Forest::Forest(std::vector<Lattice> lattices, Eigen::MatrixXd corr)
    : lattices_(std::move(lattices)), corr_(std::move(corr)) {
  if (lattices_.empty()) throw std::invalid_argument("forest needs at least one lattice");
  if (corr_.rows() != static_cast<Eigen::Index>(lattices_.size())) {
    throw std::invalid_argument("correlation matrix size must match the tree count");
  }
  for (const auto& lat : lattices_) {
    if (lat.levels() != lattices_.front().levels()) {
      throw std::invalid_argument("forest lattices must share the number of levels");
    }
  }
  factor_ = correlation_factor(corr_);
}

Forest build_forest(const std::vector<OUSpec>& specs, const Eigen::MatrixXd& corr) {
  if (specs.empty()) throw std::invalid_argument("forest needs at least one spec");
  std::vector<Lattice> lattices;
  lattices.reserve(specs.size());
  for (const auto& spec : specs) {
    if (spec.levels != specs.front().levels || spec.dt != specs.front().dt) {
      throw SpecError("forest.specs", "all specs must share levels and dt");
    }
    lattices.push_back(build_lattice(make_moment_model(spec)));
  }
  return Forest(std::move(lattices), corr);
}

std::vector<PathSample> sample_forest(const Forest& forest, std::uint64_t seed,
                                      std::uint64_t path_id) {
  const CounterRng rng(seed, path_id);
  const auto trees = static_cast<Eigen::Index>(forest.size());
  const int n = forest.levels();
  std::vector<PathSample> paths(forest.size());
  for (Eigen::Index t = 0; t < trees; ++t) {
    auto& p = paths[static_cast<std::size_t>(t)];
    p.seed = seed;
    p.path_id = path_id;
    p.offsets.assign(n + 1, 0);
    p.values.resize(n + 1);
    p.values[0] = forest.lattice(static_cast<std::size_t>(t)).value(0, 0);
  }
  Eigen::VectorXd z(trees);
  for (int j = 0; j < n; ++j) {
    for (Eigen::Index t = 0; t < trees; ++t) z[t] = rng.normal(j, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd correlated = forest.factor() * z;
    for (Eigen::Index t = 0; t < trees; ++t) {
      auto& p = paths[static_cast<std::size_t>(t)];
      const auto& lat = forest.lattice(static_cast<std::size_t>(t));
      const double u = standard_normal_cdf(correlated[t]);
      const int k = draw_next_offset(lat, j, p.offsets[j], u);
      p.offsets[j + 1] = k;
      p.values[j + 1] = lat.value(j + 1, k);
    }
  }
  return paths;
}

Moments empirical_moments(const std::vector<PathSample>& paths, int j) {
  if (paths.size() < 2) {
    throw std::invalid_argument("empirical variance needs at least two paths");
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(paths.size()));
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& v = paths[i].values;
    if (j < 0 || j >= v.size()) throw std::out_of_range("level outside path");
    x[static_cast<Eigen::Index>(i)] = v[j];
  }
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
  return {mean, var};
}

void write_paths_csv(std::ostream& out, const std::vector<PathSample>& paths,
                     const std::function<double(double)>& quote) {
  out << "seed,path_id,level,offset,value\n";
  for (const auto& p : paths) {
    for (std::size_t j = 0; j < p.offsets.size(); ++j) {
      out << fmt::format("{},{},{},{},{}\n", p.seed, p.path_id, j, p.offsets[j],
                         format_double(quote(p.values[static_cast<Eigen::Index>(j)])));
    }
  }
}

void write_forest_csv(std::ostream& out,
                      const std::vector<std::vector<PathSample>>& draws,
                      const std::vector<std::function<double(double)>>& quotes) {
  out << "seed,path_id,tree_id,level,offset,value\n";
  for (const auto& draw : draws) {
    for (std::size_t t = 0; t < draw.size(); ++t) {
      const auto& p = draw[t];
      for (std::size_t j = 0; j < p.offsets.size(); ++j) {
        out << fmt::format("{},{},{},{},{},{}\n", p.seed, p.path_id, t, j, p.offsets[j],
                           format_double(quotes.at(t)(p.values[static_cast<Eigen::Index>(j)])));
      }
    }
  }
}

}  // namespace recomb
