#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

#include "recomb/process.hpp"

namespace recomb {

enum class NodeKind { center, spanning_above, spanning_below };

const char* to_string(NodeKind kind);

// Level index j and vertical offset k from the center node (|k| <= j).
struct NodeCoord {
  int j = 0;
  int k = 0;
  friend bool operator==(const NodeCoord&, const NodeCoord&) = default;
};

// Build or structural failure tied to a node.
class LatticeError : public std::runtime_error {
 public:
  LatticeError(NodeCoord node, const std::string& message);
  NodeCoord node() const noexcept { return node_; }

 private:
  NodeCoord node_;
};

struct LatticeNode {
  int j = 0;
  int k = 0;
  double value = 0.0;
  double cond_mean = 0.0;
  NodeKind kind = NodeKind::center;
};

// Trinomial time transition out of a center node. eta = M - g_mid.
struct CenterBranches {
  double p_u = 0.0;
  double p_n = 0.0;
  double p_d = 0.0;
  double eta = 0.0;
};

// Solution of the two-moment equations for one spanning node: x is the value
// of the newly spawned outer node, p the sibling probability (move one offset
// toward the center in the same epoch).
struct BranchSolve {
  double x = 0.0;
  double p = 1.0;
  bool degenerate = false;
  int iterations = 0;
};

struct LatticeLevel {
  double dx = 0.0;             // center grid spacing, 0 at the root
  Eigen::VectorXd values;      // offsets -j..j stored at k + j
  Eigen::VectorXd cond_means;  // M at each node
  CenterBranches center;       // unused on the terminal level
  std::vector<BranchSolve> spanning;  // k + j; empty on the terminal level
};

// The simplified recombination tree: a trinomial center path plus spanning
// nodes that each carry one time transition and one sibling branch.
class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(std::vector<LatticeLevel> levels);

  int levels() const { return static_cast<int>(levels_.size()) - 1; }
  long node_count() const;
  bool contains(int j, int k) const;

  const LatticeLevel& level(int j) const { return levels_.at(j); }
  double value(int j, int k) const { return at(j).values[k + j]; }
  double cond_mean(int j, int k) const { return at(j).cond_means[k + j]; }
  double dx(int j) const { return at(j).dx; }
  LatticeNode node(int j, int k) const;

  const CenterBranches& center_branches(int j) const;
  const BranchSolve& spanning(int j, int k) const;

  // Adjacent nodes within a level whose values are not strictly increasing
  // in k; each entry names the lower of the pair.
  std::vector<NodeCoord> order_violations() const;
  bool is_monotone() const { return order_violations().empty(); }

 private:
  const LatticeLevel& at(int j) const;

  std::vector<LatticeLevel> levels_;
};

struct BuildOptions {
  // Reject lattices whose node values are not strictly increasing in k.
  bool strict_ordering = false;
};

// Stage one: center value, flanking children and trinomial probabilities for
// the step out of a center node with conditional mean `mean` and step
// variance `variance`. Returns (center, spacing, branches).
struct CenterStep {
  double center = 0.0;
  double dx = 0.0;
  CenterBranches branches;
};
CenterStep center_step(double mean, double variance);

// Stage-one center path of the model alone: values and branches per level.
struct CenterPath {
  Eigen::VectorXd values;  // levels + 1
  Eigen::VectorXd dx;      // levels + 1, dx[0] = 0
  std::vector<CenterBranches> branches;  // levels
};
CenterPath build_center_path(const MomentModel& model);

// Solves (x - M_self)/(x - M_inner) = (V - (x - M_self)^2) /
// (V + (M_inner - M_self)^2 - (x - M_self)^2) by bisection on the bracket
// [M_self, M_self + sqrt(V)] (mirrored when M_self < M_inner).
// `outward` (+1/-1) picks the side of the degenerate solution when
// M_self == M_inner; 0 means "above".
BranchSolve solve_branch_equation(double m_self, double m_inner, double variance,
                                  int outward = 0);

// The two sides of the branch equation, exposed for diagnostics and tests.
double branch_mean_ratio(double x, double m_self, double m_inner);
double branch_variance_ratio(double x, double m_self, double m_inner,
                             double variance);

Lattice build_lattice(const MomentModel& model, const BuildOptions& options = {});

// Law of one epoch out of node (j, k), with sibling chains expanded. Support
// points are sorted by destination value (ties by offset).
struct StepDistribution {
  std::vector<int> offsets;  // at level j + 1
  Eigen::VectorXd values;
  Eigen::VectorXd probs;

  double mean() const;
  double variance() const;
};

StepDistribution one_step_distribution(const Lattice& lat, int j, int k);

}  // namespace recomb
