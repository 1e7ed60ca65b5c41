#include "branchnet/branchmap.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "branchnet/errors.hpp"
#include "branchnet/matrix_io.hpp"
#include "json.hpp"

namespace branchnet {
namespace {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::left: return "left";
    case Direction::right: return "right";
    default: return "both";
  }
}

Direction direction_from_name(const std::string& s) {
  if (s == "left") return Direction::left;
  if (s == "right") return Direction::right;
  if (s == "both") return Direction::both;
  throw DataError("unknown direction: " + s);
}

}  // namespace

std::vector<Branch> extract_branches(const Ensemble& ens) {
  std::vector<Branch> out;
  int degenerate = 0;
  for (int t = 0; t < static_cast<int>(ens.trees.size()); ++t) {
    const DecisionTree& tree = ens.trees[static_cast<std::size_t>(t)];
    if (tree.nodes.size() == 1) {
      ++degenerate;
      std::cerr << "warning: tree " << t << " is a single leaf and contributes no branches\n";
      continue;
    }
    // parent[i] = id of the internal node whose child i is.
    std::vector<int> parent(tree.nodes.size(), -1);
    for (const TreeNode& n : tree.nodes)
      if (!n.is_leaf) {
        parent[static_cast<std::size_t>(n.left)] = n.id;
        parent[static_cast<std::size_t>(n.right)] = n.id;
      }
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf) continue;
      const bool parents_leaf = tree.nodes[static_cast<std::size_t>(n.left)].is_leaf ||
                                tree.nodes[static_cast<std::size_t>(n.right)].is_leaf;
      if (!parents_leaf) continue;
      std::vector<int> path{n.id};
      while (path.back() != tree.root_id) path.push_back(parent[static_cast<std::size_t>(path.back())]);
      std::reverse(path.begin(), path.end());

      Branch b;
      b.tree_index = t;
      b.node_id = n.id;
      for (std::size_t i = 0; i < path.size(); ++i) {
        const TreeNode& p = tree.nodes[static_cast<std::size_t>(path[i])];
        Direction dir = Direction::both;
        if (i + 1 < path.size())
          dir = path[i + 1] == p.left ? Direction::left : Direction::right;
        b.conditions.push_back({p.feature, p.threshold, dir});
      }
      b.feature_set.reserve(b.conditions.size());
      for (const BranchCondition& c : b.conditions) b.feature_set.push_back(c.feature);
      std::sort(b.feature_set.begin(), b.feature_set.end());
      b.feature_set.erase(std::unique(b.feature_set.begin(), b.feature_set.end()),
                          b.feature_set.end());
      b.class_counts = n.class_counts;
      out.push_back(std::move(b));
    }
  }
  if (!ens.trees.empty() && degenerate == static_cast<int>(ens.trees.size()))
    throw DataError("every tree degenerated to a single leaf; no branches to map");
  return out;
}

Architecture build_architecture(const std::vector<Branch>& branches, int d, int C,
                                bool condition_level_frequency) {
  if (branches.empty()) throw DataError("build_architecture: no branches");
  const int H = static_cast<int>(branches.size());

  Eigen::VectorXd freq = Eigen::VectorXd::Zero(d);
  for (const Branch& b : branches) {
    if (condition_level_frequency) {
      for (const BranchCondition& c : b.conditions) {
        if (c.feature < 0 || c.feature >= d)
          throw DataError("build_architecture: feature index out of range");
        freq(c.feature) += 1.0;
      }
    } else {
      for (const int f : b.feature_set) {
        if (f < 0 || f >= d) throw DataError("build_architecture: feature index out of range");
        freq(f) += 1.0;
      }
    }
  }
  const double freq_max = freq.maxCoeff();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Architecture arch;
  arch.d = d;
  arch.H = H;
  arch.C = C;
  arch.mask_m1 = Eigen::MatrixXd::Zero(H, d);
  arch.w1_init = Eigen::MatrixXd::Zero(H, d);
  arch.w2 = Eigen::MatrixXd::Zero(C, H);
  for (int h = 0; h < H; ++h) {
    const Branch& b = branches[static_cast<std::size_t>(h)];
    for (const int f : b.feature_set) {
      arch.mask_m1(h, f) = 1.0;
      arch.w1_init(h, f) = freq(f) / freq_max * scale;
    }
    if (b.class_counts.size() != C)
      throw DataError("build_architecture: class count length mismatch");
    const double total = static_cast<double>(b.class_counts.sum());
    if (!(total > 0)) throw DataError("build_architecture: branch with zero class counts");
    arch.w2.col(h) = b.class_counts.cast<double>() / total * scale;
  }
  arch.branches = branches;

  const int last_tree = branches.back().tree_index;
  int h = 0;
  for (int t = 0; t <= last_tree; ++t) {
    const int begin = h;
    while (h < H && branches[static_cast<std::size_t>(h)].tree_index == t) ++h;
    arch.tree_boundaries.emplace_back(begin, h);
  }
  return arch;
}

Architecture derive_architecture(const Ensemble& ens, bool condition_level_frequency) {
  Architecture arch = build_architecture(extract_branches(ens), ens.n_features,
                                         ens.n_classes, condition_level_frequency);
  // Rebuild boundaries over the full tree list so trailing branchless trees
  // still get an (empty) range.
  arch.tree_boundaries.clear();
  int h = 0;
  for (int t = 0; t < static_cast<int>(ens.trees.size()); ++t) {
    const int begin = h;
    while (h < arch.H && arch.branches[static_cast<std::size_t>(h)].tree_index == t) ++h;
    arch.tree_boundaries.emplace_back(begin, h);
  }
  return arch;
}

SparsityStats sparsity_stats(const Architecture& arch) {
  SparsityStats s;
  s.H = arch.H;
  s.d = arch.d;
  s.C = arch.C;
  s.w1_sparsity = static_cast<double>((arch.mask_m1.array() == 0.0).count()) /
                  static_cast<double>(arch.mask_m1.size());
  s.w2_sparsity = static_cast<double>((arch.w2.array() == 0.0).count()) /
                  static_cast<double>(arch.w2.size());
  return s;
}

void save_architecture(const Architecture& arch, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const SparsityStats s = sparsity_stats(arch);
  nlohmann::json j;
  j["format"] = "branchnet-arch/1";
  j["d"] = arch.d;
  j["H"] = arch.H;
  j["C"] = arch.C;
  j["sparsity"] = {{"w1", s.w1_sparsity}, {"w2", s.w2_sparsity}};
  nlohmann::json jb = nlohmann::json::array();
  for (const Branch& b : arch.branches) {
    nlohmann::json cond = nlohmann::json::array();
    for (const BranchCondition& c : b.conditions)
      cond.push_back({{"feature", c.feature},
                      {"threshold", c.threshold},
                      {"direction", direction_name(c.direction)}});
    jb.push_back({{"tree", b.tree_index},
                  {"node", b.node_id},
                  {"class_counts", std::vector<int>(b.class_counts.data(),
                                                    b.class_counts.data() + b.class_counts.size())},
                  {"conditions", std::move(cond)}});
  }
  j["branches"] = std::move(jb);
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& [b, e] : arch.tree_boundaries) bounds.push_back({b, e});
  j["tree_boundaries"] = std::move(bounds);

  std::ofstream out(std::filesystem::path(dir) / "arch.json");
  if (!out) throw DataError("cannot write architecture header in " + dir);
  out << j.dump(2) << '\n';
  write_matrix_csv(arch.mask_m1, (std::filesystem::path(dir) / "mask_m1.csv").string());
  write_matrix_csv(arch.w1_init, (std::filesystem::path(dir) / "w1_init.csv").string());
  write_matrix_csv(arch.w2, (std::filesystem::path(dir) / "w2.csv").string());
}

Architecture load_architecture(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "arch.json");
  if (!in) throw DataError("cannot open architecture header in " + dir);
  Architecture arch;
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("format").get<std::string>() != "branchnet-arch/1")
      throw DataError("unsupported architecture format");
    arch.d = j.at("d").get<int>();
    arch.H = j.at("H").get<int>();
    arch.C = j.at("C").get<int>();
    for (const nlohmann::json& jb : j.at("branches")) {
      Branch b;
      b.tree_index = jb.at("tree").get<int>();
      b.node_id = jb.at("node").get<int>();
      const auto counts = jb.at("class_counts").get<std::vector<int>>();
      b.class_counts = Eigen::Map<const Eigen::VectorXi>(counts.data(),
                                                         static_cast<Eigen::Index>(counts.size()));
      for (const nlohmann::json& jc : jb.at("conditions"))
        b.conditions.push_back({jc.at("feature").get<int>(), jc.at("threshold").get<double>(),
                                direction_from_name(jc.at("direction").get<std::string>())});
      for (const BranchCondition& c : b.conditions) b.feature_set.push_back(c.feature);
      std::sort(b.feature_set.begin(), b.feature_set.end());
      b.feature_set.erase(std::unique(b.feature_set.begin(), b.feature_set.end()),
                          b.feature_set.end());
      arch.branches.push_back(std::move(b));
    }
    for (const nlohmann::json& jp : j.at("tree_boundaries"))
      arch.tree_boundaries.emplace_back(jp.at(0).get<int>(), jp.at(1).get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad architecture JSON: ") + e.what());
  }
  arch.mask_m1 = read_matrix_csv((std::filesystem::path(dir) / "mask_m1.csv").string());
  arch.w1_init = read_matrix_csv((std::filesystem::path(dir) / "w1_init.csv").string());
  arch.w2 = read_matrix_csv((std::filesystem::path(dir) / "w2.csv").string());
  if (arch.mask_m1.rows() != arch.H || arch.mask_m1.cols() != arch.d ||
      arch.w1_init.rows() != arch.H || arch.w1_init.cols() != arch.d ||
      arch.w2.rows() != arch.C || arch.w2.cols() != arch.H)
    throw DataError("architecture matrices disagree with header dims in " + dir);
  return arch;
}

}  // namespace branchnet
