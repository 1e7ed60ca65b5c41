#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "branchnet/trees.hpp"

namespace branchnet {

/// Side a condition routes to. `both` marks the terminal split of a branch:
/// the branch ends at a parent of leaves and either child may be taken.
enum class Direction { left, right, both };

struct BranchCondition {
  int feature = -1;
  double threshold = 0.0;
  Direction direction = Direction::both;
};

/// A root-to-node decision path ending at an internal node that directly
/// parents at least one leaf. One hidden unit per branch.
struct Branch {
  int tree_index = 0;
  int node_id = 0;
  std::vector<BranchCondition> conditions;  // root to node, node's split last
  std::vector<int> feature_set;             // distinct features, ascending
  Eigen::VectorXi class_counts;             // counts at the terminal node
};

/// The compiled network skeleton: connectivity mask, symbolic initial W1,
/// frozen W2, and the branch bookkeeping behind each hidden unit.
struct Architecture {
  Eigen::MatrixXd mask_m1;  // H x d, entries 0/1
  Eigen::MatrixXd w1_init;  // H x d, zero where the mask is zero
  Eigen::MatrixXd w2;       // C x H, column h = class proportions / sqrt(d)
  std::vector<Branch> branches;
  std::vector<std::pair<int, int>> tree_boundaries;  // [begin, end) per tree
  int d = 0;
  int H = 0;
  int C = 0;
};

struct SparsityStats {
  double w1_sparsity = 0.0;  // fraction of zero entries in mask_m1
  double w2_sparsity = 0.0;  // fraction of exactly-zero entries in w2
  int H = 0;
  int d = 0;
  int C = 0;
};

/// One Branch per parent-of-leaf node, ordered by (tree index, node id).
/// Single-leaf trees contribute nothing and are reported on stderr; an
/// ensemble made only of such trees is an error.
std::vector<Branch> extract_branches(const Ensemble& ens);

/// Assemble mask / W1 / W2 from branches. w1_init[h,f] is the branch count
/// of feature f over the whole ensemble, normalized by the most-used
/// feature's count, times 1/sqrt(d); w2 columns are the branch class
/// proportions times 1/sqrt(d). With condition_level_frequency a feature
/// used k times along one path contributes k instead of 1.
Architecture build_architecture(const std::vector<Branch>& branches, int d, int C,
                                bool condition_level_frequency = false);

/// extract_branches + build_architecture, with tree_boundaries filled in.
Architecture derive_architecture(const Ensemble& ens,
                                 bool condition_level_frequency = false);

SparsityStats sparsity_stats(const Architecture& arch);

/// Directory format "branchnet-arch/1": arch.json carrying dims, sparsity,
/// branches, and tree boundaries, next to mask_m1.csv / w1_init.csv / w2.csv.
void save_architecture(const Architecture& arch, const std::string& dir);
Architecture load_architecture(const std::string& dir);

}  // namespace branchnet
