#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "branchnet/branchmap.hpp"
#include "branchnet/dataset.hpp"
#include "branchnet/errors.hpp"
#include "branchnet/trees.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace branchnet;

namespace {

TreeNode internal_node(int id, int feature, double thr, int left, int right,
                       std::initializer_list<int> counts, int depth) {
  TreeNode n;
  n.id = id;
  n.is_leaf = false;
  n.feature = feature;
  n.threshold = thr;
  n.left = left;
  n.right = right;
  n.class_counts = Eigen::VectorXi(static_cast<Eigen::Index>(counts.size()));
  int i = 0;
  for (int c : counts) n.class_counts(i++) = c;
  n.depth = depth;
  return n;
}

TreeNode leaf_node(int id, std::initializer_list<int> counts, int depth) {
  TreeNode n;
  n.id = id;
  n.is_leaf = true;
  n.class_counts = Eigen::VectorXi(static_cast<Eigen::Index>(counts.size()));
  int i = 0;
  for (int c : counts) n.class_counts(i++) = c;
  n.depth = depth;
  return n;
}

Ensemble wrap(std::vector<DecisionTree> trees, int d, int C) {
  Ensemble e;
  e.trees = std::move(trees);
  e.config = EnsembleConfig{static_cast<int>(e.trees.size()), 16, 2, 1, 0};
  e.n_features = d;
  e.n_classes = C;
  return e;
}

DecisionTree stump(int feature, double thr, std::initializer_list<int> left,
                   std::initializer_list<int> right) {
  DecisionTree t;
  Eigen::VectorXi lc(static_cast<Eigen::Index>(left.size())), rc(lc.size());
  int i = 0;
  for (int c : left) lc(i++) = c;
  i = 0;
  for (int c : right) rc(i++) = c;
  TreeNode root = internal_node(0, feature, thr, 1, 2, {}, 0);
  root.class_counts = lc + rc;
  t.nodes.push_back(root);
  TreeNode l = leaf_node(1, {}, 1);
  l.class_counts = lc;
  TreeNode r = leaf_node(2, {}, 1);
  r.class_counts = rc;
  t.nodes.push_back(l);
  t.nodes.push_back(r);
  t.root_id = 0;
  t.n_leaves = 2;
  return t;
}

// number of internal nodes with at least one leaf child, counted by traversal
int hidden_count_oracle(const Ensemble& ens) {
  int h = 0;
  for (const DecisionTree& t : ens.trees) {
    if (t.nodes.size() == 1) continue;
    for (const TreeNode& n : t.nodes)
      if (!n.is_leaf && (t.nodes[static_cast<std::size_t>(n.left)].is_leaf ||
                         t.nodes[static_cast<std::size_t>(n.right)].is_leaf))
        ++h;
  }
  return h;
}

}  // namespace

TEST_CASE("a stump yields one branch holding only its own split") {
  const Ensemble ens = wrap({stump(0, 1.5, {30, 0}, {0, 10})}, 4, 2);
  const std::vector<Branch> branches = extract_branches(ens);
  REQUIRE(branches.size() == 1);
  const Branch& b = branches[0];
  CHECK(b.tree_index == 0);
  CHECK(b.node_id == 0);
  REQUIRE(b.conditions.size() == 1);
  CHECK(b.conditions[0].feature == 0);
  CHECK(b.conditions[0].threshold == 1.5);
  CHECK(b.conditions[0].direction == Direction::both);
  CHECK(b.feature_set == std::vector<int>{0});
  CHECK(b.class_counts(0) == 30);
  CHECK(b.class_counts(1) == 10);
}

TEST_CASE("single-branch architecture arithmetic") {
  const Ensemble ens = wrap({stump(0, 1.5, {30, 0}, {0, 10})}, 4, 2);
  const Architecture arch = derive_architecture(ens);
  CHECK(arch.d == 4);
  CHECK(arch.H == 1);
  CHECK(arch.C == 2);
  // 1/sqrt(4) scaling, sole feature at the ensemble-max frequency
  CHECK(arch.w1_init(0, 0) == 0.5);
  CHECK(arch.mask_m1(0, 0) == 1.0);
  CHECK(arch.mask_m1.sum() == 1.0);
  CHECK(arch.w1_init.sum() == 0.5);
  // class proportions 30/40 and 10/40 scaled by 1/2
  CHECK(arch.w2(0, 0) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(arch.w2(1, 0) == doctest::Approx(0.125).epsilon(1e-15));
  REQUIRE(arch.tree_boundaries.size() == 1);
  CHECK(arch.tree_boundaries[0] == std::make_pair(0, 1));
}

TEST_CASE("a depth-two tree yields one branch per parent of a leaf") {
  DecisionTree t;
  t.nodes.push_back(internal_node(0, 0, 2.0, 1, 2, {30, 10}, 0));
  t.nodes.push_back(internal_node(1, 1, 1.0, 3, 4, {20, 5}, 1));
  t.nodes.push_back(leaf_node(2, {10, 5}, 1));
  t.nodes.push_back(leaf_node(3, {20, 0}, 2));
  t.nodes.push_back(leaf_node(4, {0, 5}, 2));
  t.root_id = 0;
  t.n_leaves = 3;
  const Ensemble ens = wrap({t}, 4, 2);
  const std::vector<Branch> branches = extract_branches(ens);
  REQUIRE(branches.size() == 2);
  CHECK(branches[0].node_id == 0);
  REQUIRE(branches[0].conditions.size() == 1);
  CHECK(branches[0].conditions[0].direction == Direction::both);
  CHECK(branches[1].node_id == 1);
  REQUIRE(branches[1].conditions.size() == 2);
  CHECK(branches[1].conditions[0].feature == 0);
  CHECK(branches[1].conditions[0].direction == Direction::left);
  CHECK(branches[1].conditions[1].feature == 1);
  CHECK(branches[1].conditions[1].direction == Direction::both);

  const Architecture arch = build_architecture(branches, 4, 2);
  CHECK(arch.H == 2);
  // feature 0 sits in both branches, feature 1 in one; max frequency is 2
  CHECK(arch.w1_init(0, 0) == 0.5);
  CHECK(arch.w1_init(1, 0) == 0.5);
  CHECK(arch.w1_init(1, 1) == 0.25);
  CHECK(arch.w1_init(0, 1) == 0.0);
  CHECK(arch.mask_m1(0, 1) == 0.0);
  CHECK(arch.w2(0, 0) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(arch.w2(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(arch.w2(1, 1) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("condition-level frequency counts repeats, branch membership does not") {
  DecisionTree t;
  t.nodes.push_back(internal_node(0, 0, 3.0, 1, 4, {30, 20}, 0));
  t.nodes.push_back(internal_node(1, 0, 1.0, 2, 3, {20, 10}, 1));
  t.nodes.push_back(leaf_node(2, {10, 0}, 2));
  t.nodes.push_back(leaf_node(3, {10, 10}, 2));
  t.nodes.push_back(internal_node(4, 1, 0.0, 5, 6, {10, 10}, 1));
  t.nodes.push_back(leaf_node(5, {5, 0}, 2));
  t.nodes.push_back(leaf_node(6, {5, 10}, 2));
  t.root_id = 0;
  t.n_leaves = 4;
  const Ensemble ens = wrap({t}, 2, 2);
  const std::vector<Branch> branches = extract_branches(ens);
  REQUIRE(branches.size() == 2);
  CHECK(branches[0].feature_set == std::vector<int>{0});  // f0 twice, kept once

  const double scale = 1.0 / std::sqrt(2.0);
  const Architecture by_branch = build_architecture(branches, 2, 2, false);
  CHECK(by_branch.w1_init(1, 1) == doctest::Approx(0.5 * scale).epsilon(1e-15));
  const Architecture by_condition = build_architecture(branches, 2, 2, true);
  CHECK(by_condition.w1_init(1, 1) == doctest::Approx(scale / 3.0).epsilon(1e-15));
  CHECK(by_branch.w1_init(0, 0) == doctest::Approx(scale).epsilon(1e-15));
  CHECK(by_condition.w1_init(0, 0) == doctest::Approx(scale).epsilon(1e-15));
}

TEST_CASE("derived architectures satisfy the structural invariants") {
  const Dataset ds = make_blobs(250, 7, 3, 2.0, 51);
  std::vector<int> idx(250);
  for (int i = 0; i < 250; ++i) idx[static_cast<std::size_t>(i)] = i;
  const Ensemble ens = fit_ensemble(ds, idx, 19);
  const std::vector<Branch> branches = extract_branches(ens);
  const Architecture arch = derive_architecture(ens);

  CHECK(arch.H == static_cast<int>(branches.size()));
  CHECK(arch.H == hidden_count_oracle(ens));
  CHECK(arch.H <= static_cast<int>(ens.trees.size()) * (ens.config.max_leaves - 1));

  // branches ordered by (tree, node id)
  for (std::size_t i = 1; i < branches.size(); ++i) {
    const bool ordered = branches[i - 1].tree_index < branches[i].tree_index ||
                         (branches[i - 1].tree_index == branches[i].tree_index &&
                          branches[i - 1].node_id < branches[i].node_id);
    CHECK(ordered);
  }

  // mask mirrors the branch feature sets; weights are positive exactly there
  const double scale = 1.0 / std::sqrt(7.0);
  for (int h = 0; h < arch.H; ++h) {
    std::set<int> fs(branches[static_cast<std::size_t>(h)].feature_set.begin(),
                     branches[static_cast<std::size_t>(h)].feature_set.end());
    for (int j = 0; j < arch.d; ++j) {
      const bool on = fs.count(j) > 0;
      CHECK(arch.mask_m1(h, j) == (on ? 1.0 : 0.0));
      if (on) {
        CHECK(arch.w1_init(h, j) > 0.0);
        CHECK(arch.w1_init(h, j) <= scale + 1e-15);
      } else {
        CHECK(arch.w1_init(h, j) == 0.0);
      }
    }
  }

  // recompute branch-membership frequencies as an independent oracle
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(arch.d);
  for (const Branch& b : branches)
    for (int f : b.feature_set) freq(f) += 1.0;
  const double peak = freq.maxCoeff();
  for (int h = 0; h < arch.H; ++h)
    for (int j = 0; j < arch.d; ++j)
      if (arch.mask_m1(h, j) == 1.0)
        CHECK(arch.w1_init(h, j) == doctest::Approx(freq(j) / peak * scale).epsilon(1e-12));

  // every output column scales back to a probability vector
  const double root_d = std::sqrt(static_cast<double>(arch.d));
  for (int h = 0; h < arch.H; ++h) {
    CHECK(std::abs(arch.w2.col(h).sum() * root_d - 1.0) < 1e-12);
    CHECK(arch.w2.col(h).minCoeff() >= 0.0);
  }

  // boundaries partition the hidden units in tree order
  REQUIRE(arch.tree_boundaries.size() == ens.trees.size());
  int cursor = 0;
  for (std::size_t t = 0; t < arch.tree_boundaries.size(); ++t) {
    CHECK(arch.tree_boundaries[t].first == cursor);
    CHECK(arch.tree_boundaries[t].second >= cursor);
    for (int h = arch.tree_boundaries[t].first; h < arch.tree_boundaries[t].second; ++h)
      CHECK(branches[static_cast<std::size_t>(h)].tree_index == static_cast<int>(t));
    cursor = arch.tree_boundaries[t].second;
  }
  CHECK(cursor == arch.H);
}

TEST_CASE("branch conditions replay the routing of the tree") {
  const Dataset ds = make_blobs(150, 5, 3, 2.0, 23);
  std::vector<int> idx(150);
  for (int i = 0; i < 150; ++i) idx[static_cast<std::size_t>(i)] = i;
  const Ensemble ens = fit_ensemble(ds, idx, 31);
  const std::vector<Branch> branches = extract_branches(ens);
  for (int r = 0; r < 20; ++r) {
    const Eigen::RowVectorXd x = ds.features.row(r);
    for (const Branch& b : branches) {
      const DecisionTree& t = ens.trees[static_cast<std::size_t>(b.tree_index)];
      // oracle: does the routing path visit the branch's terminal node?
      bool visits = false;
      int node = t.root_id;
      while (true) {
        if (node == b.node_id) visits = true;
        const TreeNode& n = t.nodes[static_cast<std::size_t>(node)];
        if (n.is_leaf) break;
        node = x(n.feature) <= n.threshold ? n.left : n.right;
      }
      bool conjunction = true;
      for (const BranchCondition& c : b.conditions) {
        if (c.direction == Direction::both) continue;
        const bool left = x(c.feature) <= c.threshold;
        if (c.direction == Direction::left ? !left : left) conjunction = false;
      }
      CHECK(conjunction == visits);
    }
  }
}

TEST_CASE("input sparsity counts absent connections, output sparsity stored zeros") {
  Architecture arch;
  arch.d = 4;
  arch.H = 5;
  arch.C = 2;
  arch.mask_m1.setZero(5, 4);
  arch.w1_init.setZero(5, 4);
  for (int h = 0; h < 4; ++h) {
    arch.mask_m1(h, h % 4) = 1.0;
    arch.w1_init(h, h % 4) = 0.3;
  }
  arch.mask_m1(4, 0) = 1.0;
  arch.w1_init(4, 0) = 0.0;  // an active connection with weight zero is still a connection
  arch.w2.setZero(2, 5);
  arch.w2(0, 0) = 0.5;
  const SparsityStats s = sparsity_stats(arch);
  CHECK(s.w1_sparsity == doctest::Approx(15.0 / 20.0).epsilon(1e-15));
  CHECK(s.w2_sparsity == doctest::Approx(9.0 / 10.0).epsilon(1e-15));
  CHECK(s.H == 5);
  CHECK(s.d == 4);
  CHECK(s.C == 2);
}

TEST_CASE("architecture save and load round trip") {
  const Dataset ds = make_blobs(120, 4, 2, 2.0, 61);
  std::vector<int> idx(120);
  for (int i = 0; i < 120; ++i) idx[static_cast<std::size_t>(i)] = i;
  const Architecture arch = derive_architecture(fit_ensemble(ds, idx, 3));
  const auto dir = testutil::temp_dir("arch");
  save_architecture(arch, dir.string());
  const Architecture back = load_architecture(dir.string());
  CHECK(back.d == arch.d);
  CHECK(back.H == arch.H);
  CHECK(back.C == arch.C);
  CHECK(back.mask_m1 == arch.mask_m1);
  CHECK(back.w1_init == arch.w1_init);
  CHECK(back.w2 == arch.w2);
  CHECK(back.tree_boundaries == arch.tree_boundaries);
  REQUIRE(back.branches.size() == arch.branches.size());
  for (std::size_t i = 0; i < arch.branches.size(); ++i) {
    CHECK(back.branches[i].tree_index == arch.branches[i].tree_index);
    CHECK(back.branches[i].node_id == arch.branches[i].node_id);
    CHECK(back.branches[i].feature_set == arch.branches[i].feature_set);
    CHECK(back.branches[i].class_counts == arch.branches[i].class_counts);
    REQUIRE(back.branches[i].conditions.size() == arch.branches[i].conditions.size());
    for (std::size_t k = 0; k < arch.branches[i].conditions.size(); ++k) {
      CHECK(back.branches[i].conditions[k].feature == arch.branches[i].conditions[k].feature);
      CHECK(back.branches[i].conditions[k].threshold ==
            arch.branches[i].conditions[k].threshold);
      CHECK(back.branches[i].conditions[k].direction ==
            arch.branches[i].conditions[k].direction);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("an ensemble of single leaves cannot be mapped") {
  DecisionTree t;
  t.nodes.push_back(leaf_node(0, {5, 5}, 0));
  t.root_id = 0;
  t.n_leaves = 1;
  const Ensemble ens = wrap({t, t}, 3, 2);
  CHECK_THROWS_AS(extract_branches(ens), DataError);
}

TEST_CASE("single-leaf trees are skipped but keep an empty boundary range") {
  DecisionTree lone;
  lone.nodes.push_back(leaf_node(0, {5, 5}, 0));
  lone.root_id = 0;
  lone.n_leaves = 1;
  const Ensemble ens = wrap({lone, stump(1, 0.5, {4, 0}, {0, 6})}, 3, 2);
  const Architecture arch = derive_architecture(ens);
  CHECK(arch.H == 1);
  REQUIRE(arch.tree_boundaries.size() == 2);
  CHECK(arch.tree_boundaries[0] == std::make_pair(0, 0));
  CHECK(arch.tree_boundaries[1] == std::make_pair(0, 1));
}
