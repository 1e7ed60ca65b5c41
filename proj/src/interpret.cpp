#include "branchnet/interpret.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace branchnet {
namespace {

std::string feature_label(int f, const std::vector<std::string>& names) {
  if (f >= 0 && f < static_cast<int>(names.size())) return names[static_cast<std::size_t>(f)];
  return "x" + std::to_string(f);
}

std::string num(double v, const char* fmt = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

FeatureCoverage feature_coverage(const Architecture& arch) {
  FeatureCoverage fc;
  fc.n_hidden = arch.H;
  fc.counts.resize(static_cast<std::size_t>(arch.d), 0);
  fc.proportions.resize(static_cast<std::size_t>(arch.d), 0.0);
  for (int f = 0; f < arch.d; ++f) {
    fc.counts[static_cast<std::size_t>(f)] = static_cast<int>(arch.mask_m1.col(f).sum());
    fc.proportions[static_cast<std::size_t>(f)] =
        static_cast<double>(fc.counts[static_cast<std::size_t>(f)]) / static_cast<double>(arch.H);
  }
  return fc;
}

std::string explanation_to_text(const Explanation& e,
                                const std::vector<std::string>& feature_names) {
  std::ostringstream out;
  out << "predicted class " << e.predicted_class << ", probabilities [";
  for (Eigen::Index c = 0; c < e.probabilities.size(); ++c)
    out << (c ? ", " : "") << num(e.probabilities(c), "%.3f");
  out << "]\n";
  for (const TreeExplanation& te : e.trees) {
    out << "tree " << te.tree_index << ", neuron " << te.hidden_unit << " (activation "
        << num(te.activation, "%.4f") << "): ";
    bool wrote_any = false;
    std::string terminal;
    for (const ConditionCheck& c : te.checks) {
      const std::string name = feature_label(c.condition.feature, feature_names);
      if (c.condition.direction == Direction::both) {
        terminal = "terminal split " + name + " at " + num(c.condition.threshold) + " (went " +
                   (c.taken == Direction::left ? "left" : "right") + ")";
        continue;
      }
      if (wrote_any) out << " AND ";
      out << name << (c.condition.direction == Direction::left ? " <= " : " > ")
          << num(c.condition.threshold) << (c.satisfied ? " ✓" : " ✗");
      wrote_any = true;
    }
    if (!wrote_any) out << "(no interior conditions)";
    out << " -> rule " << (te.rule_satisfied ? "fulfilled" : "not fulfilled");
    if (!terminal.empty()) out << "; " << terminal;
    out << "; branch class mix [";
    for (Eigen::Index c = 0; c < te.class_mix.size(); ++c)
      out << (c ? ", " : "") << num(te.class_mix(c), "%.2f");
    out << "]\n";
  }
  return out.str();
}

std::string explanation_to_json(const Explanation& e,
                                const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["predicted_class"] = e.predicted_class;
  j["probabilities"] = std::vector<double>(e.probabilities.data(),
                                           e.probabilities.data() + e.probabilities.size());
  nlohmann::json trees = nlohmann::json::array();
  for (const TreeExplanation& te : e.trees) {
    nlohmann::json checks = nlohmann::json::array();
    for (const ConditionCheck& c : te.checks) {
      const char* dir = c.condition.direction == Direction::left    ? "left"
                        : c.condition.direction == Direction::right ? "right"
                                                                    : "both";
      checks.push_back({{"feature", c.condition.feature},
                        {"feature_name", feature_label(c.condition.feature, feature_names)},
                        {"threshold", c.condition.threshold},
                        {"direction", dir},
                        {"taken", c.taken == Direction::left ? "left" : "right"},
                        {"satisfied", c.satisfied}});
    }
    trees.push_back({{"tree", te.tree_index},
                     {"neuron", te.hidden_unit},
                     {"activation", te.activation},
                     {"rule_satisfied", te.rule_satisfied},
                     {"conditions", std::move(checks)},
                     {"class_mix", std::vector<double>(te.class_mix.data(),
                                                       te.class_mix.data() + te.class_mix.size())}});
  }
  j["trees"] = std::move(trees);
  return j.dump(2);
}

}  // namespace branchnet
