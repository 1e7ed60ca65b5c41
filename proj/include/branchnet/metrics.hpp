#pragma once

#include <vector>

#include "branchnet/dataset.hpp"
#include "branchnet/errors.hpp"
#include "branchnet/network.hpp"

namespace branchnet {

struct Metrics {
  double accuracy = 0.0;
  double f1_macro = 0.0;
};

/// Accuracy plus unweighted mean of per-class F1. A class with zero
/// denominator (never true and never predicted) contributes F1 = 0.
Metrics metrics_from_predictions(const Eigen::VectorXi& truth, const Eigen::VectorXi& pred,
                                 int n_classes);

template <typename Scalar>
Metrics evaluate(BranchNetModel<Scalar>& model, const Dataset& ds, const std::vector<int>& idx) {
  if (idx.empty()) throw DataError("evaluate: empty index set");
  const Eigen::MatrixX<Scalar> x = gather_rows<Scalar>(ds.features, idx);
  const Eigen::VectorXi y = gather_labels(ds.labels, idx);
  const Predictions<Scalar> p = predict(model, x);
  return metrics_from_predictions(y, p.labels, ds.n_classes);
}

}  // namespace branchnet
