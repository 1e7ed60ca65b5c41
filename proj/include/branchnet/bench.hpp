#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "branchnet/training.hpp"
#include "branchnet/wilcoxon.hpp"

namespace branchnet {

/// One dataset entry of a bench config: a CSV on disk, or a synthetic
/// Gaussian-blobs description generated on the fly.
struct BenchDatasetSpec {
  std::string name;
  std::string path;  // empty for synthetic entries
  std::string label_column = "label";
  bool synthetic = false;
  int n_samples = 0;
  int n_features = 0;
  int n_classes = 0;
  double spread = 1.0;
  std::uint64_t data_seed = 1;
};

struct BenchConfig {
  std::vector<BenchDatasetSpec> datasets;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
  std::string baseline_path;  // optional per-seed baseline score CSV
  double alpha = 0.01;
};

/// Strict parse: unknown keys are errors. "seeds" may be an array or a
/// count N meaning 1..N.
BenchConfig bench_config_from_json(const std::string& text);

struct RunResult {
  std::string dataset;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  int n_hidden = 0;
  double w1_sparsity = 0.0;
  double w2_sparsity = 0.0;
  int best_epoch = 0;
  int stopped_epoch = 0;
  double best_val_loss = 0.0;
  double w1_init_min = 0.0, w1_init_max = 0.0;
  double w1_trained_min = 0.0, w1_trained_max = 0.0;
};

struct ScoreRow {
  std::string dataset;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

/// CSV with header dataset,seed,accuracy,f1.
std::vector<ScoreRow> load_scores(const std::string& path);
void write_scores(const std::vector<ScoreRow>& rows, const std::string& path);

struct MetricComparison {
  std::string dataset;
  std::string metric;  // "accuracy" or "f1"
  std::string name_a, name_b;
  double mean_a = 0.0, std_a = 0.0;
  double mean_b = 0.0, std_b = 0.0;
  WilcoxonResult test;
  std::string winner;  // name of the better side, or "tie"
};

/// Pair a and b by (dataset, seed) over the datasets both sides carry
/// (mismatched seed sets within a shared dataset are an error) and run the
/// exact signed-rank test on a - b per dataset and metric. winner is "tie"
/// exactly when p >= alpha, otherwise the side with the larger rank sum.
std::vector<MetricComparison> compare_scores(const std::vector<ScoreRow>& a,
                                             const std::vector<ScoreRow>& b,
                                             const std::string& name_a,
                                             const std::string& name_b, double alpha);

std::string comparison_table_text(const std::vector<MetricComparison>& rows, double alpha);
void write_comparison_csv(const std::vector<MetricComparison>& rows, const std::string& path);

struct ExperimentReport {
  std::vector<RunResult> runs;
  std::vector<MetricComparison> comparisons;
};

/// The full harness. For every dataset x seed: split, fit the ensemble,
/// compile the architecture, train, evaluate on the test slice. Jobs run on
/// a worker pool capped by BRANCHNET_WORKERS. Emits runs.csv, summary.csv,
/// summary.txt, report.json, scores.csv, and first-seed W1 heatmaps
/// (initial and trained, CSV + PGM) into out_dir; the bytes written depend
/// only on the config.
ExperimentReport run_benchmark(const BenchConfig& cfg, const std::string& out_dir);

}  // namespace branchnet
