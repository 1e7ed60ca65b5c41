#include "branchnet/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "branchnet/branchmap.hpp"
#include "branchnet/errors.hpp"
#include "branchnet/matrix_io.hpp"
#include "branchnet/metrics.hpp"
#include "branchnet/trees.hpp"
#include "json.hpp"

namespace branchnet {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator); callers guarantee n >= 2.
double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int worker_count(std::size_t jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("BRANCHNET_WORKERS")) {
    const char* end = env + std::char_traits<char>::length(env);
    int parsed = 0;
    auto [ptr, ec] = std::from_chars(env, end, parsed);
    if (ec == std::errc{} && ptr == end && parsed >= 1) n = parsed;
  }
  return std::min<int>(n, static_cast<int>(jobs));
}

BenchDatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
  BenchDatasetSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "name") spec.name = value.get<std::string>();
    else if (key == "path") spec.path = value.get<std::string>();
    else if (key == "label") spec.label_column = value.get<std::string>();
    else if (key == "synthetic") {
      spec.synthetic = true;
      for (const auto& [sk, sv] : value.items()) {
        if (sk == "n_samples") spec.n_samples = sv.get<int>();
        else if (sk == "n_features") spec.n_features = sv.get<int>();
        else if (sk == "n_classes") spec.n_classes = sv.get<int>();
        else if (sk == "spread") spec.spread = sv.get<double>();
        else if (sk == "seed") spec.data_seed = sv.get<std::uint64_t>();
        else throw DataError("bench config: unknown synthetic key '" + sk + "'");
      }
    } else {
      throw DataError("bench config: unknown dataset key '" + key + "'");
    }
  }
  if (spec.name.empty()) throw DataError("bench config: dataset entry without a name");
  if (!spec.synthetic && spec.path.empty())
    throw DataError("bench config: dataset '" + spec.name + "' needs a path or a synthetic block");
  if (spec.synthetic && !spec.path.empty())
    throw DataError("bench config: dataset '" + spec.name + "' has both a path and a synthetic block");
  return spec;
}

}  // namespace

BenchConfig bench_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad bench config JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("bench config JSON must be an object");
  BenchConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "datasets") {
        for (const nlohmann::json& jd : value) cfg.datasets.push_back(dataset_spec_from_json(jd));
      } else if (key == "seeds") {
        if (value.is_number_unsigned() || value.is_number_integer()) {
          const long n = value.get<long>();
          if (n < 1) throw DataError("bench config: seed count must be positive");
          for (long s = 1; s <= n; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        } else {
          cfg.seeds = value.get<std::vector<std::uint64_t>>();
        }
      } else if (key == "train") {
        cfg.train = train_config_from_json(value.dump());
      } else if (key == "baseline") {
        cfg.baseline_path = value.get<std::string>();
      } else if (key == "alpha") {
        cfg.alpha = value.get<double>();
      } else {
        throw DataError("bench config: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bench config key '" + key + "': " + e.what());
    }
  }
  if (cfg.datasets.empty()) throw DataError("bench config: no datasets");
  std::set<std::string> names;
  for (const BenchDatasetSpec& d : cfg.datasets)
    if (!names.insert(d.name).second)
      throw DataError("bench config: duplicate dataset name '" + d.name + "'");
  if (!(cfg.alpha > 0 && cfg.alpha < 1)) throw DataError("bench config: alpha must be in (0,1)");
  return cfg;
}

std::vector<ScoreRow> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty score file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "dataset,seed,accuracy,f1")
    throw DataError("score file " + path + " must start with header dataset,seed,accuracy,f1");
  std::vector<ScoreRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string ds, seed_s, acc_s, f1_s;
    if (!std::getline(ss, ds, ',') || !std::getline(ss, seed_s, ',') ||
        !std::getline(ss, acc_s, ',') || !std::getline(ss, f1_s))
      throw DataError("score file " + path + ": malformed line " + std::to_string(line_no));
    ScoreRow r;
    r.dataset = ds;
    try {
      r.seed = std::stoull(seed_s);
      r.accuracy = std::stod(acc_s);
      r.f1 = std::stod(f1_s);
    } catch (const std::exception&) {
      throw DataError("score file " + path + ": bad numeric field on line " +
                      std::to_string(line_no));
    }
    if (!std::isfinite(r.accuracy) || !std::isfinite(r.f1))
      throw DataError("score file " + path + ": non-finite score on line " +
                      std::to_string(line_no));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("score file " + path + " has no data rows");
  return rows;
}

void write_scores(const std::vector<ScoreRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "dataset,seed,accuracy,f1\n";
  for (const ScoreRow& r : rows)
    out << r.dataset << ',' << r.seed << ',' << fmt(r.accuracy) << ',' << fmt(r.f1) << '\n';
}

std::vector<MetricComparison> compare_scores(const std::vector<ScoreRow>& a,
                                             const std::vector<ScoreRow>& b,
                                             const std::string& name_a,
                                             const std::string& name_b, double alpha) {
  std::map<std::string, std::map<std::uint64_t, const ScoreRow*>> by_ds_a, by_ds_b;
  for (const ScoreRow& r : a) by_ds_a[r.dataset][r.seed] = &r;
  for (const ScoreRow& r : b) by_ds_b[r.dataset][r.seed] = &r;

  std::vector<MetricComparison> out;
  for (const auto& [dataset, a_rows] : by_ds_a) {
    const auto itb = by_ds_b.find(dataset);
    if (itb == by_ds_b.end()) continue;
    const auto& b_rows = itb->second;
    if (a_rows.size() != b_rows.size())
      throw DataError("comparison: seed sets differ for dataset '" + dataset + "'");
    std::vector<const ScoreRow*> pa, pb;
    for (const auto& [seed, row] : a_rows) {
      const auto itr = b_rows.find(seed);
      if (itr == b_rows.end())
        throw DataError("comparison: dataset '" + dataset + "' misses seed " +
                        std::to_string(seed) + " on one side");
      pa.push_back(row);
      pb.push_back(itr->second);
    }
    for (const char* metric : {"accuracy", "f1"}) {
      MetricComparison c;
      c.dataset = dataset;
      c.metric = metric;
      c.name_a = name_a;
      c.name_b = name_b;
      std::vector<double> va, vb, diffs;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        const double xa = c.metric == "accuracy" ? pa[i]->accuracy : pa[i]->f1;
        const double xb = c.metric == "accuracy" ? pb[i]->accuracy : pb[i]->f1;
        va.push_back(xa);
        vb.push_back(xb);
        diffs.push_back(xa - xb);
      }
      c.mean_a = mean_of(va);
      c.mean_b = mean_of(vb);
      c.std_a = va.size() > 1 ? std_of(va) : 0.0;
      c.std_b = vb.size() > 1 ? std_of(vb) : 0.0;
      c.test = wilcoxon_exact(diffs);
      if (c.test.p_value >= alpha) c.winner = "tie";
      else c.winner = c.test.w_plus > c.test.w_minus ? name_a : name_b;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::string comparison_table_text(const std::vector<MetricComparison>& rows, double alpha) {
  std::ostringstream out;
  char buf[256];
  const std::string head_a = (rows.empty() ? "side A" : rows.front().name_a) + " mean+-std";
  const std::string head_b = (rows.empty() ? "side B" : rows.front().name_b) + " mean+-std";
  std::snprintf(buf, sizeof buf, "%-16s %-9s %-19s %-19s %-12s %s\n", "dataset", "metric",
                head_a.c_str(), head_b.c_str(), "p-value", "winner");
  out << buf;
  for (const MetricComparison& c : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %-9s %.4f +- %.4f    %.4f +- %.4f    %-12.6g %s%s\n",
                  c.dataset.c_str(), c.metric.c_str(), c.mean_a, c.std_a, c.mean_b, c.std_b,
                  c.test.p_value, c.winner.c_str(), c.test.degenerate ? " (degenerate)" : "");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "significance threshold alpha = %g\n", alpha);
  out << buf;
  return out.str();
}

void write_comparison_csv(const std::vector<MetricComparison>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "dataset,metric,mean_a,std_a,mean_b,std_b,w_plus,w_minus,n_nonzero,p_value,degenerate,winner\n";
  for (const MetricComparison& c : rows)
    out << c.dataset << ',' << c.metric << ',' << fmt(c.mean_a) << ',' << fmt(c.std_a) << ','
        << fmt(c.mean_b) << ',' << fmt(c.std_b) << ',' << fmt(c.test.w_plus) << ','
        << fmt(c.test.w_minus) << ',' << c.test.n_nonzero << ',' << fmt(c.test.p_value) << ','
        << (c.test.degenerate ? 1 : 0) << ',' << c.winner << '\n';
}

namespace {

struct JobOutput {
  RunResult result;
  // Heatmap payload, kept only for the first seed of each dataset.
  std::optional<Eigen::MatrixXd> w1_init;
  std::optional<Eigen::MatrixXd> w1_trained;
};

JobOutput run_job(const Dataset& ds, const BenchDatasetSpec& spec, std::uint64_t seed,
                  const TrainConfig& base_cfg, bool keep_heatmaps) {
  SplitIndices splits = split(ds, seed);
  const Ensemble ens = fit_ensemble(ds, splits.train, seed);
  const Architecture arch = derive_architecture(ens);
  BranchNetModel<double> model = make_model<double>(arch, base_cfg.bn_eps, base_cfg.bn_momentum,
                                                    base_cfg.bn_affine_trainable);
  TrainConfig cfg = base_cfg;
  cfg.seed = seed;
  const TrainRecord rec = train(model, ds, splits, cfg);
  const Metrics m = evaluate(model, ds, splits.test);
  const SparsityStats sp = sparsity_stats(arch);

  JobOutput out;
  out.result.dataset = spec.name;
  out.result.seed = seed;
  out.result.accuracy = m.accuracy;
  out.result.f1_macro = m.f1_macro;
  out.result.n_hidden = arch.H;
  out.result.w1_sparsity = sp.w1_sparsity;
  out.result.w2_sparsity = sp.w2_sparsity;
  out.result.best_epoch = rec.best_epoch;
  out.result.stopped_epoch = rec.stopped_epoch;
  out.result.best_val_loss = rec.best_val_loss;
  out.result.w1_init_min = arch.w1_init.minCoeff();
  out.result.w1_init_max = arch.w1_init.maxCoeff();
  out.result.w1_trained_min = model.w1.minCoeff();
  out.result.w1_trained_max = model.w1.maxCoeff();
  if (keep_heatmaps) {
    out.w1_init = arch.w1_init;
    out.w1_trained = model.w1;
  }
  return out;
}

}  // namespace

ExperimentReport run_benchmark(const BenchConfig& cfg, const std::string& out_dir) {
  if (cfg.seeds.size() < 2) throw DataError("bench: need at least 2 seeds");
  {
    std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
    if (unique.size() != cfg.seeds.size()) throw DataError("bench: duplicate seeds");
  }
  validate(cfg.train);
  std::filesystem::create_directories(out_dir);

  std::vector<Dataset> datasets;
  datasets.reserve(cfg.datasets.size());
  for (const BenchDatasetSpec& spec : cfg.datasets) {
    if (spec.synthetic)
      datasets.push_back(make_blobs(spec.n_samples, spec.n_features, spec.n_classes, spec.spread,
                                    spec.data_seed));
    else
      datasets.push_back(load_csv(spec.path, spec.label_column));
  }

  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_jobs = cfg.datasets.size() * n_seeds;
  std::vector<std::optional<JobOutput>> outputs(n_jobs);
  std::vector<std::exception_ptr> errors(n_jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_jobs) break;
      const std::size_t di = i / n_seeds;
      const std::size_t si = i % n_seeds;
      try {
        outputs[i] = run_job(datasets[di], cfg.datasets[di], cfg.seeds[si], cfg.train, si == 0);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = worker_count(n_jobs);
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentReport report;
  report.runs.reserve(n_jobs);
  for (const auto& o : outputs) report.runs.push_back(o->result);

  const std::filesystem::path out(out_dir);
  {
    std::ofstream runs(out / "runs.csv");
    if (!runs) throw DataError("cannot write runs.csv in " + out_dir);
    runs << "dataset,seed,accuracy,f1_macro,n_hidden,w1_sparsity,w2_sparsity,best_epoch,"
            "stopped_epoch,best_val_loss,w1_init_min,w1_init_max,w1_trained_min,w1_trained_max\n";
    for (const RunResult& r : report.runs)
      runs << r.dataset << ',' << r.seed << ',' << fmt(r.accuracy) << ',' << fmt(r.f1_macro) << ','
           << r.n_hidden << ',' << fmt(r.w1_sparsity) << ',' << fmt(r.w2_sparsity) << ','
           << r.best_epoch << ',' << r.stopped_epoch << ',' << fmt(r.best_val_loss) << ','
           << fmt(r.w1_init_min) << ',' << fmt(r.w1_init_max) << ',' << fmt(r.w1_trained_min)
           << ',' << fmt(r.w1_trained_max) << '\n';
  }

  std::vector<ScoreRow> own_scores;
  for (const RunResult& r : report.runs)
    own_scores.push_back({r.dataset, r.seed, r.accuracy, r.f1_macro});
  write_scores(own_scores, (out / "scores.csv").string());

  nlohmann::json jreport;
  jreport["alpha"] = cfg.alpha;
  jreport["seeds"] = cfg.seeds;

  std::ostringstream text;
  {
    std::ofstream summary(out / "summary.csv");
    if (!summary) throw DataError("cannot write summary.csv in " + out_dir);
    summary << "dataset,n_seeds,accuracy_mean,accuracy_std,f1_mean,f1_std,n_hidden_min,"
               "n_hidden_max,w1_sparsity_min,w1_sparsity_max,w2_sparsity_min,w2_sparsity_max\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %-6s %-19s %-19s %-11s %-15s %s\n", "dataset", "seeds",
                  "accuracy", "f1", "H", "W1 sparsity %", "W2 sparsity %");
    text << buf;
    nlohmann::json jaggs = nlohmann::json::array();
    for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
      std::vector<double> acc, f1, w1s, w2s;
      int h_min = 0, h_max = 0;
      for (std::size_t si = 0; si < n_seeds; ++si) {
        const RunResult& r = report.runs[di * n_seeds + si];
        acc.push_back(r.accuracy);
        f1.push_back(r.f1_macro);
        w1s.push_back(r.w1_sparsity);
        w2s.push_back(r.w2_sparsity);
        h_min = si == 0 ? r.n_hidden : std::min(h_min, r.n_hidden);
        h_max = si == 0 ? r.n_hidden : std::max(h_max, r.n_hidden);
      }
      const auto minmax = [](const std::vector<double>& v) {
        return std::make_pair(*std::min_element(v.begin(), v.end()),
                              *std::max_element(v.begin(), v.end()));
      };
      const auto [w1_lo, w1_hi] = minmax(w1s);
      const auto [w2_lo, w2_hi] = minmax(w2s);
      const std::string& name = cfg.datasets[di].name;
      summary << name << ',' << n_seeds << ',' << fmt(mean_of(acc)) << ',' << fmt(std_of(acc))
              << ',' << fmt(mean_of(f1)) << ',' << fmt(std_of(f1)) << ',' << h_min << ','
              << h_max << ',' << fmt(w1_lo) << ',' << fmt(w1_hi) << ',' << fmt(w2_lo) << ','
              << fmt(w2_hi) << '\n';
      char h_range[32], w1_range[32], w2_range[32];
      std::snprintf(h_range, sizeof h_range, "%d-%d", h_min, h_max);
      std::snprintf(w1_range, sizeof w1_range, "%.1f-%.1f", 100 * w1_lo, 100 * w1_hi);
      std::snprintf(w2_range, sizeof w2_range, "%.1f-%.1f", 100 * w2_lo, 100 * w2_hi);
      std::snprintf(buf, sizeof buf, "%-16s %-6zu %.4f +- %.4f    %.4f +- %.4f    %-11s %-15s %s\n",
                    name.c_str(), n_seeds, mean_of(acc), std_of(acc), mean_of(f1), std_of(f1),
                    h_range, w1_range, w2_range);
      text << buf;
      jaggs.push_back({{"dataset", name},
                       {"n_seeds", n_seeds},
                       {"accuracy_mean", mean_of(acc)},
                       {"accuracy_std", std_of(acc)},
                       {"f1_mean", mean_of(f1)},
                       {"f1_std", std_of(f1)},
                       {"n_hidden_min", h_min},
                       {"n_hidden_max", h_max},
                       {"w1_sparsity_min", w1_lo},
                       {"w1_sparsity_max", w1_hi},
                       {"w2_sparsity_min", w2_lo},
                       {"w2_sparsity_max", w2_hi}});
    }
    jreport["aggregates"] = std::move(jaggs);
  }

  for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
    const JobOutput& first = *outputs[di * n_seeds];
    const std::string stem = sanitize(cfg.datasets[di].name);
    write_matrix_csv(*first.w1_init, (out / (stem + "_w1_init.csv")).string());
    write_pgm(*first.w1_init, (out / (stem + "_w1_init.pgm")).string());
    write_matrix_csv(*first.w1_trained, (out / (stem + "_w1_trained.csv")).string());
    write_pgm(*first.w1_trained, (out / (stem + "_w1_trained.pgm")).string());
  }

  if (!cfg.baseline_path.empty()) {
    const std::vector<ScoreRow> baseline = load_scores(cfg.baseline_path);
    report.comparisons = compare_scores(own_scores, baseline, "branchnet", "baseline", cfg.alpha);
    write_comparison_csv(report.comparisons, (out / "comparison.csv").string());
    text << '\n' << comparison_table_text(report.comparisons, cfg.alpha);
  }

  {
    nlohmann::json jruns = nlohmann::json::array();
    for (const RunResult& r : report.runs)
      jruns.push_back({{"dataset", r.dataset},
                       {"seed", r.seed},
                       {"accuracy", r.accuracy},
                       {"f1_macro", r.f1_macro},
                       {"n_hidden", r.n_hidden},
                       {"w1_sparsity", r.w1_sparsity},
                       {"w2_sparsity", r.w2_sparsity},
                       {"best_epoch", r.best_epoch},
                       {"stopped_epoch", r.stopped_epoch},
                       {"best_val_loss", r.best_val_loss},
                       {"w1_init_min", r.w1_init_min},
                       {"w1_init_max", r.w1_init_max},
                       {"w1_trained_min", r.w1_trained_min},
                       {"w1_trained_max", r.w1_trained_max}});
    jreport["runs"] = std::move(jruns);
    nlohmann::json jcomp = nlohmann::json::array();
    for (const MetricComparison& c : report.comparisons)
      jcomp.push_back({{"dataset", c.dataset},
                       {"metric", c.metric},
                       {"mean_a", c.mean_a},
                       {"std_a", c.std_a},
                       {"mean_b", c.mean_b},
                       {"std_b", c.std_b},
                       {"w_plus", c.test.w_plus},
                       {"w_minus", c.test.w_minus},
                       {"n_nonzero", c.test.n_nonzero},
                       {"p_value", c.test.p_value},
                       {"degenerate", c.test.degenerate},
                       {"winner", c.winner}});
    jreport["comparisons"] = std::move(jcomp);
    std::ofstream jf(out / "report.json");
    if (!jf) throw DataError("cannot write report.json in " + out_dir);
    jf << jreport.dump(2) << '\n';
  }
  {
    std::ofstream tf(out / "summary.txt");
    if (!tf) throw DataError("cannot write summary.txt in " + out_dir);
    tf << text.str();
  }
  return report;
}

}  // namespace branchnet
