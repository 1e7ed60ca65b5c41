#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "branchnet/dataset.hpp"
#include "branchnet/rng.hpp"

namespace branchnet {

/// Node of a binary decision tree. Leaves carry feature = -1 and child ids
/// -1; class_counts is filled for every node and an internal node's counts
/// equal the elementwise sum of its children's.
struct TreeNode {
  int id = 0;
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Eigen::VectorXi class_counts;
  int depth = 0;
};

/// Arena-allocated binary tree. A sample routes left iff
/// x[feature] <= threshold.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  int root_id = 0;
  int n_leaves = 0;
};

struct EnsembleConfig {
  int n_trees = 1;
  int max_leaves = 2;
  int n_split_candidates = 1;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

struct Ensemble {
  std::vector<DecisionTree> trees;
  EnsembleConfig config;
  int n_features = 0;
  int n_classes = 0;
};

/// Ensemble size: n_classes + round(log2(n_features)), half away from zero.
int n_trees_formula(int n_classes, int n_features);

/// Per-tree leaf cap: 2^(round(log2(n_features)) + 4).
int max_leaves_formula(int n_features);

/// Grow one extremely-randomized tree, best first: a priority queue of
/// expandable leaves ordered by weighted Gini decrease (ties to the lower
/// node id) is consumed until the leaf cap is hit or nothing is expandable.
/// Each split draws n_split_candidates distinct features and one uniform
/// threshold strictly inside the node's (min, max) per candidate, keeping
/// the candidate with the greatest decrease. Pure nodes, nodes with fewer
/// than 2 * min_samples_leaf samples, and nodes constant in every candidate
/// feature become permanent leaves.
DecisionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                      int n_classes, const EnsembleConfig& cfg, Rng& rng);

/// Fit cfg.n_trees trees on the full (X, y); tree t uses the rng stream
/// derived from (cfg.seed, t).
Ensemble fit_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                      int n_classes, const EnsembleConfig& cfg);

/// Fit on a row slice of ds with the ensemble sized by the two formulas:
/// n_trees_formula trees, max_leaves_formula leaf cap, ceil(sqrt(d))
/// split candidates, min_samples_leaf = 1.
Ensemble fit_ensemble(const Dataset& ds, const std::vector<int>& train_idx,
                      std::uint64_t seed);

/// Node id of the leaf x lands in.
int route_to_leaf(const DecisionTree& tree, const Eigen::RowVectorXd& x);

/// Leaf class counts normalized to a probability vector.
Eigen::VectorXd predict_tree(const DecisionTree& tree, const Eigen::RowVectorXd& x);

std::string ensemble_to_json(const Ensemble& ens);
Ensemble ensemble_from_json(const std::string& text);

}  // namespace branchnet
