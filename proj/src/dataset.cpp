#include "branchnet/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "branchnet/errors.hpp"
#include "branchnet/rng.hpp"
#include "json.hpp"

namespace branchnet {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

bool parse_finite_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) return false;
  return std::isfinite(out);
}

// Integral 0/1 extras on top of floor(n_c * T_s / n) so that rows sum to the
// class sizes, columns sum to the split targets, and every cell stays within
// one sample of its exact quota. Extras are only placed on cells with a
// nonzero quota remainder, which keeps each cell at floor or ceil; a unit
// max-flow assignment over (class, split) always exists for such marginals.
std::vector<std::array<int, 3>> allocate_stratified(
    const std::vector<int>& class_sizes, const std::array<int, 3>& targets,
    long long n) {
  const int k = static_cast<int>(class_sizes.size());
  std::vector<std::array<int, 3>> cells(k);
  std::vector<std::array<long long, 3>> rem(k);
  std::vector<int> row_deficit(k);
  std::array<int, 3> col_deficit{};
  for (int s = 0; s < 3; ++s) col_deficit[s] = targets[s];
  for (int c = 0; c < k; ++c) {
    int assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const long long num = static_cast<long long>(class_sizes[c]) * targets[s];
      cells[c][s] = static_cast<int>(num / n);
      rem[c][s] = num % n;
      assigned += cells[c][s];
      col_deficit[s] -= cells[c][s];
    }
    row_deficit[c] = class_sizes[c] - assigned;
  }

  // Unit-capacity flow: source -> class rows -> eligible cells -> split
  // columns -> sink. Node ids: 0 source, 1..k rows, k+1..k+3 columns, k+4 sink.
  const int n_nodes = k + 5;
  const int source = 0, sink = k + 4;
  struct Edge {
    int to;
    int cap;
    int rev;
  };
  std::vector<std::vector<Edge>> g(n_nodes);
  auto add_edge = [&](int a, int b, int cap) {
    g[a].push_back({b, cap, static_cast<int>(g[b].size())});
    g[b].push_back({a, 0, static_cast<int>(g[a].size()) - 1});
  };
  for (int c = 0; c < k; ++c)
    if (row_deficit[c] > 0) add_edge(source, 1 + c, row_deficit[c]);
  for (int c = 0; c < k; ++c)
    for (int s = 0; s < 3; ++s)
      if (rem[c][s] > 0) add_edge(1 + c, k + 1 + s, 1);
  for (int s = 0; s < 3; ++s)
    if (col_deficit[s] > 0) add_edge(k + 1 + s, sink, col_deficit[s]);

  // BFS augmentation until the deficits are routed.
  while (true) {
    std::vector<int> prev_node(n_nodes, -1), prev_edge(n_nodes, -1);
    std::deque<int> queue{source};
    prev_node[source] = source;
    while (!queue.empty() && prev_node[sink] < 0) {
      const int u = queue.front();
      queue.pop_front();
      for (int i = 0; i < static_cast<int>(g[u].size()); ++i) {
        const Edge& e = g[u][i];
        if (e.cap > 0 && prev_node[e.to] < 0) {
          prev_node[e.to] = u;
          prev_edge[e.to] = i;
          queue.push_back(e.to);
        }
      }
    }
    if (prev_node[sink] < 0) break;
    for (int v = sink; v != source; v = prev_node[v]) {
      Edge& e = g[prev_node[v]][prev_edge[v]];
      e.cap -= 1;
      g[v][e.rev].cap += 1;
    }
  }
  for (int c = 0; c < k; ++c)
    for (const Edge& e : g[1 + c])
      if (e.to >= k + 1 && e.to <= k + 3 && e.cap == 0 && g[e.to][e.rev].cap == 1)
        cells[c][e.to - (k + 1)] += 1;
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);

  int label_idx = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i)
    if (header[i] == label_column) label_idx = i;
  if (label_idx < 0) {
    int parsed = 0;
    auto [ptr, ec] = std::from_chars(label_column.data(),
                                     label_column.data() + label_column.size(), parsed);
    if (ec == std::errc{} && ptr == label_column.data() + label_column.size() &&
        parsed >= 0 && parsed < static_cast<int>(header.size())) {
      label_idx = parsed;
    } else {
      throw DataError("label column '" + label_column + "' not found in " + path);
    }
  }

  const int n_cols = static_cast<int>(header.size());
  const int d = n_cols - 1;
  if (d < 1) throw DataError("no feature columns in " + path);

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::map<std::string, int> class_index;
  long row = 1;  // header is line 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_fields(line);
    if (static_cast<int>(fields.size()) != n_cols)
      throw DataError("row " + std::to_string(row) + " in " + path + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(n_cols));
    for (int i = 0; i < n_cols; ++i) {
      const std::string cell = trim(fields[i]);
      if (i == label_idx) {
        auto [it, inserted] =
            class_index.emplace(cell, static_cast<int>(class_names.size()));
        if (inserted) class_names.push_back(cell);
        labels.push_back(it->second);
      } else {
        double v = 0.0;
        if (!parse_finite_double(cell, v))
          throw DataError("cannot parse cell '" + cell + "' as a finite number at row " +
                          std::to_string(row) + ", column '" + header[i] + "' of " + path);
        values.push_back(v);
      }
    }
  }

  const long n = static_cast<long>(labels.size());
  if (n == 0) throw DataError("no data rows in " + path);
  if (class_names.size() < 2)
    throw DataError("fewer than 2 classes in label column of " + path);

  Dataset ds;
  ds.features.resize(n, d);
  for (long r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) ds.features(r, c) = values[static_cast<std::size_t>(r) * d + c];
  ds.labels = Eigen::Map<Eigen::VectorXi>(labels.data(), n);
  ds.n_classes = static_cast<int>(class_names.size());
  ds.class_names = std::move(class_names);
  ds.feature_names.reserve(d);
  for (int i = 0; i < n_cols; ++i)
    if (i != label_idx) ds.feature_names.push_back(header[i]);
  return ds;
}

SplitIndices split(const Dataset& ds, std::uint64_t seed, bool stratified) {
  const long long n = ds.n_samples();
  const int t_train = static_cast<int>(round_half_away(0.70 * static_cast<double>(n)));
  const int t_test = static_cast<int>(round_half_away(0.20 * static_cast<double>(n)));
  const int t_val = static_cast<int>(n) - t_train - t_test;
  const std::array<int, 3> targets{t_train, t_test, t_val};

  Rng rng = make_rng(seed, Stream::split);
  SplitIndices out;
  out.seed = seed;

  if (!stratified) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    shuffle_in_place(idx, rng);
    out.train.assign(idx.begin(), idx.begin() + t_train);
    out.test.assign(idx.begin() + t_train, idx.begin() + t_train + t_test);
    out.val.assign(idx.begin() + t_train + t_test, idx.end());
  } else {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.n_classes));
    for (int i = 0; i < n; ++i)
      by_class[static_cast<std::size_t>(ds.labels(i))].push_back(i);
    std::vector<int> class_sizes;
    for (const auto& v : by_class) {
      if (v.size() < 3)
        throw DataError("stratified split needs at least 3 samples per class; a class has " +
                        std::to_string(v.size()));
      class_sizes.push_back(static_cast<int>(v.size()));
    }
    const auto cells = allocate_stratified(class_sizes, targets, n);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      shuffle_in_place(by_class[c], rng);
      const auto& a = cells[c];
      auto it = by_class[c].begin();
      out.train.insert(out.train.end(), it, it + a[0]);
      it += a[0];
      out.test.insert(out.test.end(), it, it + a[1]);
      it += a[1];
      out.val.insert(out.val.end(), it, by_class[c].end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

Dataset make_blobs(int n_samples, int n_features, int n_classes, double spread,
                   std::uint64_t seed) {
  if (n_samples < 1 || n_features < 1 || n_classes < 2 || n_classes > n_samples)
    throw DataError("make_blobs: invalid sizes");
  if (!(spread > 0.0)) throw DataError("make_blobs: spread must be positive");

  Rng rng = make_rng(seed, Stream::blobs);
  Gaussian gauss(rng);

  // Class centers drawn in [-5, 5]^d, re-drawn until pairwise separated; the
  // separation requirement is relaxed when the box cannot hold that many
  // distinct centers (low d, many classes).
  Eigen::MatrixXd centers(n_classes, n_features);
  double min_dist = 3.0;
  for (int c = 0; c < n_classes; ++c) {
    for (int attempt = 0;; ++attempt) {
      for (int f = 0; f < n_features; ++f)
        centers(c, f) = -5.0 + 10.0 * uniform01(rng);
      bool ok = true;
      for (int p = 0; p < c; ++p)
        if ((centers.row(c) - centers.row(p)).norm() < min_dist) ok = false;
      if (ok) break;
      if (attempt > 0 && attempt % 200 == 0) min_dist = std::max(min_dist * 0.5, 1e-9);
    }
  }

  Dataset ds;
  ds.n_classes = n_classes;
  ds.features.resize(n_samples, n_features);
  ds.labels.resize(n_samples);
  std::vector<int> counts(static_cast<std::size_t>(n_classes), n_samples / n_classes);
  for (int c = 0; c < n_samples % n_classes; ++c) counts[static_cast<std::size_t>(c)] += 1;
  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
      ds.labels(row) = c;
      for (int f = 0; f < n_features; ++f)
        ds.features(row, f) = centers(c, f) + spread * gauss();
    }
  }
  for (int f = 0; f < n_features; ++f) ds.feature_names.push_back("x" + std::to_string(f));
  for (int c = 0; c < n_classes; ++c) ds.class_names.push_back(std::to_string(c));
  return ds;
}

std::string split_to_json(const SplitIndices& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["train"] = s.train;
  j["test"] = s.test;
  j["val"] = s.val;
  return j.dump();
}

SplitIndices split_from_json(const std::string& text) {
  SplitIndices s;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<int>>();
    s.test = j.at("test").get<std::vector<int>>();
    s.val = j.at("val").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad split JSON: ") + e.what());
  }
  return s;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (Eigen::Index f = 0; f < ds.n_features(); ++f)
    out << ds.feature_names[static_cast<std::size_t>(f)] << ',';
  out << "label\n";
  char buf[64];
  for (Eigen::Index r = 0; r < ds.n_samples(); ++r) {
    for (Eigen::Index f = 0; f < ds.n_features(); ++f) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features(r, f));
      out << buf << ',';
    }
    out << ds.class_names[static_cast<std::size_t>(ds.labels(r))] << '\n';
  }
}

}  // namespace branchnet
