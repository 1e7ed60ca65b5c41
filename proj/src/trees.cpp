#include "branchnet/trees.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "branchnet/errors.hpp"
#include "json.hpp"

namespace branchnet {
namespace {

double gini(const Eigen::VectorXi& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (Eigen::Index c = 0; c < counts.size(); ++c) {
    const double p = static_cast<double>(counts(c)) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct CandidateSplit {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double priority = 0.0;  // n_node * Gini decrease; tree-wide comparable
};

// Entries in the expansion queue; row lists live in a side table so heap
// reshuffles stay cheap.
struct QueueEntry {
  double priority;
  int node_id;
  int feature;
  double threshold;
  bool operator<(const QueueEntry& o) const {
    if (priority != o.priority) return priority < o.priority;
    return node_id > o.node_id;  // equal priority: lower id expands first
  }
};

Eigen::VectorXi count_classes(const Eigen::VectorXi& y, const std::vector<int>& rows,
                              int n_classes) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(n_classes);
  for (const int r : rows) counts(y(r)) += 1;
  return counts;
}

CandidateSplit best_split(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                          const std::vector<int>& rows, const Eigen::VectorXi& counts,
                          int n_classes, const EnsembleConfig& cfg, Rng& rng,
                          std::vector<int>& feature_pool) {
  CandidateSplit best;
  const int n = static_cast<int>(rows.size());
  if (n < 2 * cfg.min_samples_leaf) return best;
  if ((counts.array() > 0).count() <= 1) return best;

  const int d = static_cast<int>(X.cols());
  const int k = std::min(cfg.n_split_candidates, d);
  for (int i = 0; i < d; ++i) feature_pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(d - i)));
    std::swap(feature_pool[static_cast<std::size_t>(i)], feature_pool[static_cast<std::size_t>(j)]);
  }

  const double parent = static_cast<double>(n) * gini(counts, n);
  Eigen::VectorXi left_counts(n_classes);
  for (int i = 0; i < k; ++i) {
    const int f = feature_pool[static_cast<std::size_t>(i)];
    double lo = X(rows[0], f), hi = lo;
    for (const int r : rows) {
      const double v = X(r, f);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) continue;  // constant feature at this node; no draw
    const double thr = lo + (hi - lo) * uniform_open01(rng);
    left_counts.setZero();
    int n_left = 0;
    for (const int r : rows)
      if (X(r, f) <= thr) {
        left_counts(y(r)) += 1;
        ++n_left;
      }
    const int n_right = n - n_left;
    if (n_left == 0 || n_right == 0) continue;
    const Eigen::VectorXi right_counts = counts - left_counts;
    const double decrease = parent - static_cast<double>(n_left) * gini(left_counts, n_left) -
                            static_cast<double>(n_right) * gini(right_counts, n_right);
    if (decrease > best.priority) {
      best.valid = true;
      best.feature = f;
      best.threshold = thr;
      best.priority = decrease;
    }
  }
  return best;
}

}  // namespace

int n_trees_formula(int n_classes, int n_features) {
  if (n_classes < 2 || n_features < 1)
    throw DataError("n_trees_formula: need n_classes >= 2 and n_features >= 1");
  return n_classes + static_cast<int>(round_half_away(std::log2(static_cast<double>(n_features))));
}

int max_leaves_formula(int n_features) {
  if (n_features < 1) throw DataError("max_leaves_formula: need n_features >= 1");
  const long e = round_half_away(std::log2(static_cast<double>(n_features))) + 4;
  if (e >= 31) throw DataError("max_leaves_formula: feature count too large");
  return 1 << e;
}

DecisionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                      int n_classes, const EnsembleConfig& cfg, Rng& rng) {
  if (X.rows() == 0) throw DataError("fit_tree: empty input");
  if (X.rows() != y.size()) throw DataError("fit_tree: X and y disagree on sample count");

  DecisionTree tree;
  tree.root_id = 0;
  std::vector<int> feature_pool(static_cast<std::size_t>(X.cols()));

  std::vector<int> root_rows(static_cast<std::size_t>(X.rows()));
  for (int r = 0; r < X.rows(); ++r) root_rows[static_cast<std::size_t>(r)] = r;

  TreeNode root;
  root.id = 0;
  root.class_counts = count_classes(y, root_rows, n_classes);
  tree.nodes.push_back(std::move(root));
  tree.n_leaves = 1;

  std::priority_queue<QueueEntry> queue;
  std::vector<std::vector<int>> pending_rows;
  pending_rows.push_back(std::move(root_rows));

  auto consider = [&](int node_id, std::vector<int>&& rows) {
    const CandidateSplit cand = best_split(X, y, rows, tree.nodes[static_cast<std::size_t>(node_id)].class_counts,
                                           n_classes, cfg, rng, feature_pool);
    if (cand.valid) {
      queue.push({cand.priority, node_id, cand.feature, cand.threshold});
      pending_rows[static_cast<std::size_t>(node_id)] = std::move(rows);
    }
  };

  {
    std::vector<int> rows = std::move(pending_rows[0]);
    pending_rows[0].clear();
    consider(0, std::move(rows));
  }

  while (tree.n_leaves < cfg.max_leaves && !queue.empty()) {
    const QueueEntry top = queue.top();
    queue.pop();
    std::vector<int> rows = std::move(pending_rows[static_cast<std::size_t>(top.node_id)]);
    pending_rows[static_cast<std::size_t>(top.node_id)].clear();

    std::vector<int> left_rows, right_rows;
    for (const int r : rows)
      (X(r, top.feature) <= top.threshold ? left_rows : right_rows).push_back(r);

    const int left_id = static_cast<int>(tree.nodes.size());
    const int right_id = left_id + 1;
    const int depth = tree.nodes[static_cast<std::size_t>(top.node_id)].depth + 1;

    TreeNode left;
    left.id = left_id;
    left.depth = depth;
    left.class_counts = count_classes(y, left_rows, n_classes);
    TreeNode right;
    right.id = right_id;
    right.depth = depth;
    right.class_counts =
        tree.nodes[static_cast<std::size_t>(top.node_id)].class_counts - left.class_counts;
    tree.nodes.push_back(std::move(left));
    tree.nodes.push_back(std::move(right));
    pending_rows.emplace_back();
    pending_rows.emplace_back();

    TreeNode& parent = tree.nodes[static_cast<std::size_t>(top.node_id)];
    parent.is_leaf = false;
    parent.feature = top.feature;
    parent.threshold = top.threshold;
    parent.left = left_id;
    parent.right = right_id;
    tree.n_leaves += 1;

    consider(left_id, std::move(left_rows));
    consider(right_id, std::move(right_rows));
  }
  return tree;
}

Ensemble fit_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                      int n_classes, const EnsembleConfig& cfg) {
  Ensemble ens;
  ens.config = cfg;
  ens.n_features = static_cast<int>(X.cols());
  ens.n_classes = n_classes;
  ens.trees.reserve(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng = make_rng(cfg.seed, Stream::tree, static_cast<std::uint64_t>(t));
    ens.trees.push_back(fit_tree(X, y, n_classes, cfg, rng));
  }
  return ens;
}

Ensemble fit_ensemble(const Dataset& ds, const std::vector<int>& train_idx,
                      std::uint64_t seed) {
  if (train_idx.empty()) throw DataError("fit_ensemble: empty training slice");
  const int d = static_cast<int>(ds.n_features());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(train_idx.size()), d);
  Eigen::VectorXi y(static_cast<Eigen::Index>(train_idx.size()));
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = ds.features.row(train_idx[i]);
    y(static_cast<Eigen::Index>(i)) = ds.labels(train_idx[i]);
  }
  EnsembleConfig cfg;
  cfg.n_trees = n_trees_formula(ds.n_classes, d);
  cfg.max_leaves = max_leaves_formula(d);
  cfg.n_split_candidates = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  cfg.min_samples_leaf = 1;
  cfg.seed = seed;
  return fit_ensemble(X, y, ds.n_classes, cfg);
}

int route_to_leaf(const DecisionTree& tree, const Eigen::RowVectorXd& x) {
  if (!x.allFinite()) throw DataError("route_to_leaf: non-finite input");
  int id = tree.root_id;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    id = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return id;
}

Eigen::VectorXd predict_tree(const DecisionTree& tree, const Eigen::RowVectorXd& x) {
  const TreeNode& leaf = tree.nodes[static_cast<std::size_t>(route_to_leaf(tree, x))];
  const double total = static_cast<double>(leaf.class_counts.sum());
  return leaf.class_counts.cast<double>() / total;
}

std::string ensemble_to_json(const Ensemble& ens) {
  nlohmann::json root;
  root["format"] = "branchnet-trees/1";
  root["n_features"] = ens.n_features;
  root["n_classes"] = ens.n_classes;
  root["config"] = {{"n_trees", ens.config.n_trees},
                    {"max_leaves", ens.config.max_leaves},
                    {"n_split_candidates", ens.config.n_split_candidates},
                    {"min_samples_leaf", ens.config.min_samples_leaf},
                    {"seed", ens.config.seed}};
  nlohmann::json trees = nlohmann::json::array();
  for (const DecisionTree& t : ens.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      nlohmann::json jn;
      jn["id"] = n.id;
      jn["kind"] = n.is_leaf ? "leaf" : "internal";
      jn["feature"] = n.feature;
      jn["threshold"] = n.threshold;
      jn["left"] = n.left;
      jn["right"] = n.right;
      jn["class_counts"] = std::vector<int>(n.class_counts.data(),
                                            n.class_counts.data() + n.class_counts.size());
      jn["depth"] = n.depth;
      nodes.push_back(std::move(jn));
    }
    trees.push_back({{"root_id", t.root_id}, {"n_leaves", t.n_leaves}, {"nodes", std::move(nodes)}});
  }
  root["trees"] = std::move(trees);
  return root.dump();
}

Ensemble ensemble_from_json(const std::string& text) {
  Ensemble ens;
  try {
    const nlohmann::json root = nlohmann::json::parse(text);
    if (root.at("format").get<std::string>() != "branchnet-trees/1")
      throw DataError("unsupported ensemble format: " + root.at("format").get<std::string>());
    ens.n_features = root.at("n_features").get<int>();
    ens.n_classes = root.at("n_classes").get<int>();
    const nlohmann::json& jc = root.at("config");
    ens.config.n_trees = jc.at("n_trees").get<int>();
    ens.config.max_leaves = jc.at("max_leaves").get<int>();
    ens.config.n_split_candidates = jc.at("n_split_candidates").get<int>();
    ens.config.min_samples_leaf = jc.at("min_samples_leaf").get<int>();
    ens.config.seed = jc.at("seed").get<std::uint64_t>();
    for (const nlohmann::json& jt : root.at("trees")) {
      DecisionTree t;
      t.root_id = jt.at("root_id").get<int>();
      t.n_leaves = jt.at("n_leaves").get<int>();
      for (const nlohmann::json& jn : jt.at("nodes")) {
        TreeNode n;
        n.id = jn.at("id").get<int>();
        n.is_leaf = jn.at("kind").get<std::string>() == "leaf";
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        const auto counts = jn.at("class_counts").get<std::vector<int>>();
        n.class_counts = Eigen::Map<const Eigen::VectorXi>(counts.data(),
                                                           static_cast<Eigen::Index>(counts.size()));
        n.depth = jn.at("depth").get<int>();
        t.nodes.push_back(std::move(n));
      }
      ens.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad ensemble JSON: ") + e.what());
  }
  return ens;
}

}  // namespace branchnet
