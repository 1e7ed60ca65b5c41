#pragma once

#include <vector>

namespace branchnet {

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  int n_nonzero = 0;
  bool degenerate = false;  // every difference was zero
};

/// Exact two-sided Wilcoxon signed-rank test. Zero differences are
/// discarded, tied magnitudes receive midranks, and the p-value
/// 2 * min(P(W+ <= w), P(W+ >= w)) (capped at 1) is computed from the full
/// 2^n distribution of signed-rank sums. Limited to 25 nonzero differences,
/// which keeps every probability an exact dyadic rational.
WilcoxonResult wilcoxon_exact(const std::vector<double>& diffs);

}  // namespace branchnet
