#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace branchnet {

/// Tabular classification dataset. Labels are dense class indices in
/// [0, n_classes); class_names keeps the original label strings in encoding
/// order. Immutable after construction and safe to share across threads.
struct Dataset {
  Eigen::MatrixXd features;  // n_samples x n_features
  Eigen::VectorXi labels;
  int n_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  Eigen::Index n_samples() const { return features.rows(); }
  Eigen::Index n_features() const { return features.cols(); }
};

/// A 70/20/10 partition of [0, n_samples). Lists are sorted ascending.
struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> val;
  std::uint64_t seed = 0;
};

/// Load a comma-separated file (UTF-8, header row, '.' decimal point).
/// `label_column` is a header name, or a 0-based column index if no header
/// matches. Labels are re-encoded by first appearance; all feature cells
/// must parse as finite reals.
Dataset load_csv(const std::string& path, const std::string& label_column);

/// Deterministic split: |train| = round(0.70 n), |test| = round(0.20 n),
/// validation takes the remainder. Stratified by default: per-class counts in
/// each part deviate from exact proportionality by at most 1. Requires at
/// least 3 samples per class.
SplitIndices split(const Dataset& ds, std::uint64_t seed, bool stratified = true);

/// Gaussian clusters with well-separated means, labels balanced within +-1.
/// Deterministic per seed. Intended for tests and demos.
Dataset make_blobs(int n_samples, int n_features, int n_classes, double spread,
                   std::uint64_t seed);

std::string split_to_json(const SplitIndices& s);
SplitIndices split_from_json(const std::string& text);

template <typename Scalar>
Eigen::MatrixX<Scalar> gather_rows(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixX<Scalar> out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]).cast<Scalar>();
  return out;
}

inline Eigen::VectorXi gather_labels(const Eigen::VectorXi& y, const std::vector<int>& idx) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(idx[i]);
  return out;
}

/// Write a dataset back out in the dialect load_csv reads.
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace branchnet
