#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "recomb/lattice.hpp"
#include "recomb/process.hpp"

namespace recomb {

// Counter-based stream: every draw is a pure function of
// (seed, path, level, counter), so paths can be generated in any order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t path) : seed_(seed), path_(path) {}

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t level, std::uint64_t counter) const;
  // Standard normal via Box-Muller on counters (2c, 2c + 1).
  double normal(std::uint64_t level, std::uint64_t counter) const;

 private:
  std::uint64_t seed_;
  std::uint64_t path_;
};

// One realization of G(t_j, omega): the node reached at each epoch.
struct PathSample {
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  std::vector<int> offsets;  // levels + 1 entries, offsets[0] == 0
  Eigen::VectorXd values;
};

// Offset at level j + 1 after leaving (j, k): walks the sibling chain (one
// uniform per hop, counters from 0 at level j) then takes the time transition.
int walk_step(const Lattice& lat, int j, int k, const CounterRng& rng);

PathSample sample_path(const Lattice& lat, std::uint64_t seed, std::uint64_t path_id = 0);

std::vector<PathSample> sample_paths(const Lattice& lat, std::uint64_t seed,
                                     std::size_t count);

// Maps a uniform through the inverse CDF of node (j, k)'s one-step law.
int draw_next_offset(const Lattice& lat, int j, int k, double u);

// Lower-triangular L with L L^T = corr; zero pivots allowed (semi-definite).
// Throws std::invalid_argument if corr is not a valid correlation matrix.
Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr);

class Forest {
 public:
  Forest(std::vector<Lattice> lattices, Eigen::MatrixXd corr);

  std::size_t size() const { return lattices_.size(); }
  int levels() const { return lattices_.front().levels(); }
  const Lattice& lattice(std::size_t i) const { return lattices_.at(i); }
  const Eigen::MatrixXd& corr() const { return corr_; }
  const Eigen::MatrixXd& factor() const { return factor_; }

 private:
  std::vector<Lattice> lattices_;
  Eigen::MatrixXd corr_;
  Eigen::MatrixXd factor_;
};

// Builds one lattice per spec; specs must share levels and dt.
Forest build_forest(const std::vector<OUSpec>& specs, const Eigen::MatrixXd& corr);

// Gaussian copula over per-step branch draws: one correlated normal per tree
// per level, pushed through Phi and each node's inverse CDF.
std::vector<PathSample> sample_forest(const Forest& forest, std::uint64_t seed,
                                      std::uint64_t path_id = 0);

// Sample mean and unbiased variance of the state at level j (>= 2 paths).
Moments empirical_moments(const std::vector<PathSample>& paths, int j);

// CSV: seed,path_id,level,offset,value. `quote` maps state to output value.
void write_paths_csv(std::ostream& out, const std::vector<PathSample>& paths,
                     const std::function<double(double)>& quote);
// Forest dump: seed,path_id,tree_id,level,offset,value; draws[i][t] is tree t.
void write_forest_csv(std::ostream& out,
                      const std::vector<std::vector<PathSample>>& draws,
                      const std::vector<std::function<double(double)>>& quotes);

}  // namespace recomb
