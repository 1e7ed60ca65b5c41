#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "branchnet/bench.hpp"
#include "branchnet/branchmap.hpp"
#include "branchnet/dataset.hpp"
#include "branchnet/errors.hpp"
#include "branchnet/interpret.hpp"
#include "branchnet/metrics.hpp"
#include "branchnet/model_io.hpp"
#include "branchnet/training.hpp"
#include "branchnet/trees.hpp"
#include "json.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw branchnet::DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw branchnet::DataError("cannot write file: " + path);
  out << text;
}

struct TrainArgs {
  std::string data, label = "label", config, out = "branchnet_out";
  std::uint64_t seed = 1;
  bool seed_given = false;
};

void run_train(const TrainArgs& a) {
  using namespace branchnet;
  Dataset ds = load_csv(a.data, a.label);
  TrainConfig cfg;
  if (!a.config.empty()) cfg = train_config_from_json(read_file(a.config));
  if (a.seed_given || a.config.empty()) cfg.seed = a.seed;

  const SplitIndices splits = split(ds, cfg.seed);
  const Ensemble ens = fit_ensemble(ds, splits.train, cfg.seed);
  const Architecture arch = derive_architecture(ens);
  BranchNetModel<double> model =
      make_model<double>(arch, cfg.bn_eps, cfg.bn_momentum, cfg.bn_affine_trainable);
  const TrainRecord rec = train(model, ds, splits, cfg);
  const Metrics m = evaluate(model, ds, splits.test);

  const std::filesystem::path out(a.out);
  std::filesystem::create_directories(out);
  save_model(model, cfg.seed, (out / "model").string());
  save_architecture(arch, (out / "arch").string());
  write_file((out / "ensemble.json").string(), ensemble_to_json(ens));
  write_file((out / "splits.json").string(), split_to_json(splits));
  write_file((out / "record.json").string(), train_record_to_json(rec));
  write_train_record_csv(rec, (out / "record.csv").string());
  write_file((out / "config.json").string(), train_config_to_json(cfg));

  const SparsityStats sp = sparsity_stats(arch);
  nlohmann::json j;
  j["n_samples"] = ds.n_samples();
  j["n_features"] = ds.n_features();
  j["n_classes"] = ds.n_classes;
  j["n_hidden"] = arch.H;
  j["w1_sparsity"] = sp.w1_sparsity;
  j["w2_sparsity"] = sp.w2_sparsity;
  j["best_epoch"] = rec.best_epoch;
  j["stopped_epoch"] = rec.stopped_epoch;
  j["test_accuracy"] = m.accuracy;
  j["test_f1_macro"] = m.f1_macro;
  j["diverged"] = rec.diverged;
  j["out_dir"] = a.out;
  std::cout << j.dump(2) << '\n';
}

struct EvaluateArgs {
  std::string model, data, label = "label", splits;
};

void run_evaluate(const EvaluateArgs& a) {
  using namespace branchnet;
  Dataset ds = load_csv(a.data, a.label);
  SavedModel sm = load_model(a.model);
  sm.model.mode = RunMode::eval;
  std::vector<int> idx;
  if (!a.splits.empty()) {
    idx = split_from_json(read_file(a.splits)).test;
  } else {
    idx.resize(static_cast<std::size_t>(ds.n_samples()));
    for (int i = 0; i < ds.n_samples(); ++i) idx[static_cast<std::size_t>(i)] = i;
  }
  const Metrics m = evaluate(sm.model, ds, idx);
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  j["f1_macro"] = m.f1_macro;
  j["n_samples"] = idx.size();
  std::cout << j.dump(2) << '\n';
}

struct ExplainArgs {
  std::string model, arch, data, label = "label";
  int row = 0;
  bool as_json = false;
};

void run_explain(const ExplainArgs& a) {
  using namespace branchnet;
  Dataset ds = load_csv(a.data, a.label);
  SavedModel sm = load_model(a.model);
  sm.model.mode = RunMode::eval;
  const Architecture arch = load_architecture(a.arch);
  if (a.row < 0 || a.row >= ds.n_samples())
    throw DataError("row " + std::to_string(a.row) + " out of range [0, " +
                    std::to_string(ds.n_samples()) + ")");
  const Explanation e = explain_instance(sm.model, arch, Eigen::RowVectorXd(ds.features.row(a.row)));
  if (a.as_json)
    std::cout << explanation_to_json(e, ds.feature_names) << '\n';
  else
    std::cout << explanation_to_text(e, ds.feature_names);
}

struct BenchArgs {
  std::string config, out = "bench_out", baseline;
  double alpha = 0.0;
  bool alpha_given = false;
  int seeds = 0;
};

void run_bench(const BenchArgs& a) {
  using namespace branchnet;
  BenchConfig cfg = bench_config_from_json(read_file(a.config));
  if (!a.baseline.empty()) cfg.baseline_path = a.baseline;
  if (a.alpha_given) cfg.alpha = a.alpha;
  if (a.seeds > 0) {
    cfg.seeds.clear();
    for (int s = 1; s <= a.seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  run_benchmark(cfg, a.out);
  std::cout << read_file((std::filesystem::path(a.out) / "summary.txt").string());
  std::cout << "report written to " << a.out << '\n';
}

struct CompareArgs {
  std::string a, b, out;
  std::string name_a = "A", name_b = "B";
  double alpha = 0.01;
};

void run_compare(const CompareArgs& a) {
  using namespace branchnet;
  const auto rows_a = load_scores(a.a);
  const auto rows_b = load_scores(a.b);
  const auto comps = compare_scores(rows_a, rows_b, a.name_a, a.name_b, a.alpha);
  if (comps.empty()) throw DataError("no shared datasets between the two score files");
  std::cout << comparison_table_text(comps, a.alpha);
  if (!a.out.empty()) write_comparison_csv(comps, a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BranchNet: sparse neural classifiers compiled from extremely-randomized trees"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "fit ensemble, compile, and train a model");
  train->add_option("--data", train_args.data, "dataset CSV")->required();
  train->add_option("--label", train_args.label, "label column name or index");
  auto* seed_opt = train->add_option("--seed", train_args.seed, "master seed");
  train->add_option("--config", train_args.config, "training config JSON");
  train->add_option("--out", train_args.out, "output directory");
  train->callback([&] {
    train_args.seed_given = seed_opt->count() > 0;
    run_train(train_args);
  });

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics of a saved model on a dataset");
  evaluate->add_option("--model", eval_args.model, "model directory")->required();
  evaluate->add_option("--data", eval_args.data, "dataset CSV")->required();
  evaluate->add_option("--label", eval_args.label, "label column name or index");
  evaluate->add_option("--splits", eval_args.splits, "splits JSON; evaluates its test slice");
  evaluate->callback([&] { run_evaluate(eval_args); });

  ExplainArgs explain_args;
  CLI::App* explain = app.add_subcommand("explain", "branch-rule explanation for one instance");
  explain->add_option("--model", explain_args.model, "model directory")->required();
  explain->add_option("--arch", explain_args.arch, "architecture directory")->required();
  explain->add_option("--data", explain_args.data, "dataset CSV")->required();
  explain->add_option("--label", explain_args.label, "label column name or index");
  explain->add_option("--row", explain_args.row, "row to explain");
  explain->add_flag("--json", explain_args.as_json, "emit JSON instead of text");
  explain->callback([&] { run_explain(explain_args); });

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "multi-seed benchmark harness");
  bench->add_option("--config", bench_args.config, "bench config JSON")->required();
  bench->add_option("--out", bench_args.out, "report directory");
  bench->add_option("--baseline", bench_args.baseline, "baseline score CSV");
  auto* alpha_opt = bench->add_option("--alpha", bench_args.alpha, "significance threshold");
  bench->add_option("--seeds", bench_args.seeds, "use seeds 1..N");
  bench->callback([&] {
    bench_args.alpha_given = alpha_opt->count() > 0;
    run_bench(bench_args);
  });

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand("compare", "exact signed-rank test between score files");
  compare->add_option("--a", compare_args.a, "first score CSV")->required();
  compare->add_option("--b", compare_args.b, "second score CSV")->required();
  compare->add_option("--alpha", compare_args.alpha, "significance threshold");
  compare->add_option("--name-a", compare_args.name_a, "label for the first side");
  compare->add_option("--name-b", compare_args.name_b, "label for the second side");
  compare->add_option("--out", compare_args.out, "write the table as CSV here");
  compare->callback([&] { run_compare(compare_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const branchnet::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const branchnet::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const branchnet::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
