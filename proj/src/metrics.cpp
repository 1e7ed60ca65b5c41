#include "branchnet/metrics.hpp"

namespace branchnet {

Metrics metrics_from_predictions(const Eigen::VectorXi& truth, const Eigen::VectorXi& pred,
                                 int n_classes) {
  if (truth.size() != pred.size() || truth.size() == 0)
    throw DataError("metrics: prediction and truth lengths differ or are empty");
  const Eigen::Index n = truth.size();
  std::vector<long> tp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fn(static_cast<std::size_t>(n_classes), 0);
  long correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = truth(i), p = pred(i);
    if (t == p) {
      ++correct;
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  double f1_sum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    const std::size_t k = static_cast<std::size_t>(c);
    const long denom = 2 * tp[k] + fp[k] + fn[k];
    if (denom > 0) f1_sum += 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
  }
  m.f1_macro = f1_sum / static_cast<double>(n_classes);
  return m;
}

}  // namespace branchnet
