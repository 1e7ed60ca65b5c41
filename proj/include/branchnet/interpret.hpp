#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "branchnet/branchmap.hpp"
#include "branchnet/network.hpp"

namespace branchnet {

struct ConditionCheck {
  BranchCondition condition;
  Direction taken = Direction::left;  // side x actually falls on
  bool satisfied = true;              // taken agrees with the branch (true for the terminal split)
};

/// The most activated hidden unit of one tree, with its branch rule replayed
/// against the instance. rule_satisfied is the conjunction over the interior
/// conditions only; the terminal split has no required side.
struct TreeExplanation {
  int tree_index = 0;
  int hidden_unit = -1;
  double activation = 0.0;
  std::vector<ConditionCheck> checks;
  bool rule_satisfied = true;
  Eigen::VectorXd class_mix;  // branch class proportions, w2 column * sqrt(d)
};

struct Explanation {
  std::vector<TreeExplanation> trees;  // one entry per tree that owns branches
  int predicted_class = 0;
  Eigen::VectorXd probabilities;
};

struct FeatureCoverage {
  std::vector<int> counts;           // hidden units fed per feature
  std::vector<double> proportions;   // counts / H
  int n_hidden = 0;
};

/// Mask column sums: how many hidden units each feature feeds.
FeatureCoverage feature_coverage(const Architecture& arch);

std::string explanation_to_text(const Explanation& e,
                                const std::vector<std::string>& feature_names);
std::string explanation_to_json(const Explanation& e,
                                const std::vector<std::string>& feature_names);

/// One eval-mode forward for the instance; per tree, the hidden unit with
/// the highest sigmoid activation (ties to the lower unit) is selected and
/// its branch conditions are replayed on the raw feature values.
template <typename Scalar>
Explanation explain_instance(BranchNetModel<Scalar>& model, const Architecture& arch,
                             const Eigen::RowVectorXd& x) {
  if (model.mode != RunMode::eval) throw std::logic_error("explain_instance: model must be in eval mode");
  if (x.size() != arch.d || model.n_hidden() != arch.H || model.n_features() != arch.d ||
      model.n_classes() != arch.C)
    throw std::logic_error("explain_instance: model and architecture disagree");

  const ForwardTrace<Scalar> trace = forward(model, Eigen::MatrixX<Scalar>(x.cast<Scalar>()));
  Explanation e;
  e.probabilities = trace.probs.row(0).template cast<double>();
  e.predicted_class = 0;
  for (Eigen::Index c = 1; c < e.probabilities.size(); ++c)
    if (e.probabilities(c) > e.probabilities(e.predicted_class))
      e.predicted_class = static_cast<int>(c);

  const double sqrt_d = std::sqrt(static_cast<double>(arch.d));
  for (std::size_t t = 0; t < arch.tree_boundaries.size(); ++t) {
    const auto [begin, end] = arch.tree_boundaries[t];
    if (begin == end) continue;
    int best = begin;
    for (int h = begin + 1; h < end; ++h)
      if (static_cast<double>(trace.sigmoid(0, h)) > static_cast<double>(trace.sigmoid(0, best)))
        best = h;

    TreeExplanation te;
    te.tree_index = static_cast<int>(t);
    te.hidden_unit = best;
    te.activation = static_cast<double>(trace.sigmoid(0, best));
    const Branch& b = arch.branches[static_cast<std::size_t>(best)];
    for (const BranchCondition& c : b.conditions) {
      ConditionCheck check;
      check.condition = c;
      check.taken = x(c.feature) <= c.threshold ? Direction::left : Direction::right;
      if (c.direction == Direction::both) {
        check.satisfied = true;
      } else {
        check.satisfied = check.taken == c.direction;
        te.rule_satisfied = te.rule_satisfied && check.satisfied;
      }
      te.checks.push_back(check);
    }
    te.class_mix = arch.w2.col(best) * sqrt_d;
    e.trees.push_back(std::move(te));
  }
  return e;
}

}  // namespace branchnet
