#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "branchnet/dataset.hpp"
#include "branchnet/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace branchnet;
namespace fs = std::filesystem;

namespace {

Dataset cyclic_dataset(int n, int n_classes, int d = 3) {
  Dataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = i + 0.25 * j;
    ds.labels(i) = i % n_classes;
  }
  ds.n_classes = n_classes;
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (int c = 0; c < n_classes; ++c) ds.class_names.push_back(std::to_string(c));
  return ds;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("split produces 70/20/10 sizes with sorted disjoint indices") {
  const Dataset ds = cyclic_dataset(100, 4);
  const SplitIndices s = split(ds, 11);
  CHECK(s.train.size() == 70);
  CHECK(s.test.size() == 20);
  CHECK(s.val.size() == 10);
  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  CHECK(std::is_sorted(s.test.begin(), s.test.end()));
  CHECK(std::is_sorted(s.val.begin(), s.val.end()));
  std::set<int> all;
  for (const auto* part : {&s.train, &s.test, &s.val})
    for (int i : *part) all.insert(i);
  CHECK(all.size() == 100);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 99);
}

TEST_CASE("split sizes follow half-away-from-zero rounding at n=1473") {
  const Dataset ds = cyclic_dataset(1473, 3);
  const SplitIndices s = split(ds, 7);
  CHECK(s.train.size() == 1031);
  CHECK(s.test.size() == 295);
  CHECK(s.val.size() == 147);
}

TEST_CASE("stratified split keeps every class-by-part cell within one of its quota") {
  const int n = 97;  // awkward size with uneven class counts
  Dataset ds = cyclic_dataset(n, 5);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const SplitIndices s = split(ds, seed);
    const std::vector<const std::vector<int>*> parts = {&s.train, &s.test, &s.val};
    std::vector<int> class_total(5, 0);
    for (int i = 0; i < n; ++i) ++class_total[static_cast<std::size_t>(ds.labels(i))];
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto part_size = static_cast<double>(parts[p]->size());
      std::vector<int> got(5, 0);
      for (int i : *parts[p]) ++got[static_cast<std::size_t>(ds.labels(i))];
      for (int c = 0; c < 5; ++c) {
        const double quota = class_total[static_cast<std::size_t>(c)] * part_size / n;
        CHECK(std::abs(got[static_cast<std::size_t>(c)] - quota) < 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("stratified split rejects classes with fewer than three samples") {
  Dataset ds = cyclic_dataset(20, 2);
  ds.labels(0) = 2;  // a third class with a single member
  ds.n_classes = 3;
  ds.class_names.push_back("2");
  CHECK_THROWS_AS(split(ds, 1), DataError);
}

TEST_CASE("split JSON round trip") {
  const Dataset ds = cyclic_dataset(60, 3);
  const SplitIndices s = split(ds, 42);
  const SplitIndices back = split_from_json(split_to_json(s));
  CHECK(back.seed == s.seed);
  CHECK(back.train == s.train);
  CHECK(back.test == s.test);
  CHECK(back.val == s.val);
}

TEST_CASE("load_csv encodes labels by first appearance") {
  const auto dir = testutil::temp_dir("csv");
  write_text(dir / "t.csv", "a,b,label\n1,2,pos\n3,4,neg\n5,6,pos\n7,8,neg\n");
  const Dataset ds = load_csv((dir / "t.csv").string(), "label");
  CHECK(ds.n_samples() == 4);
  CHECK(ds.n_features() == 2);
  CHECK(ds.n_classes == 2);
  CHECK(ds.class_names == std::vector<std::string>{"pos", "neg"});
  CHECK(ds.labels(0) == 0);
  CHECK(ds.labels(1) == 1);
  CHECK(ds.labels(2) == 0);
  CHECK(ds.labels(3) == 1);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.features(3, 1) == 8.0);
  fs::remove_all(dir);
}

TEST_CASE("load_csv reports the offending cell for non-numeric or non-finite values") {
  const auto dir = testutil::temp_dir("csv");
  write_text(dir / "bad.csv", "f0,f1,label\n1,2,x\n3,nan,y\n");
  try {
    load_csv((dir / "bad.csv").string(), "label");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("'f1'") != std::string::npos);
  }
  write_text(dir / "bad2.csv", "f0,f1,label\n1,zebra,x\n3,4,y\n");
  CHECK_THROWS_AS(load_csv((dir / "bad2.csv").string(), "label"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("load_csv accepts a positional label column and rejects unknown names") {
  const auto dir = testutil::temp_dir("csv");
  write_text(dir / "t.csv", "c0,c1,c2\nred,1,2\nblue,3,4\nred,5,6\n");
  const Dataset ds = load_csv((dir / "t.csv").string(), "0");
  CHECK(ds.n_features() == 2);
  CHECK(ds.class_names == std::vector<std::string>{"red", "blue"});
  CHECK(ds.features(1, 0) == 3.0);
  CHECK_THROWS_AS(load_csv((dir / "t.csv").string(), "target"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("load_csv rejects single-class and ragged files") {
  const auto dir = testutil::temp_dir("csv");
  write_text(dir / "one.csv", "f,label\n1,a\n2,a\n");
  CHECK_THROWS_AS(load_csv((dir / "one.csv").string(), "label"), DataError);
  write_text(dir / "ragged.csv", "f,g,label\n1,2,a\n3,b\n");
  CHECK_THROWS_AS(load_csv((dir / "ragged.csv").string(), "label"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("write_csv then load_csv reproduces features and labels exactly") {
  const Dataset ds = make_blobs(30, 3, 2, 1.0, 5);
  const auto dir = testutil::temp_dir("csv");
  write_csv(ds, (dir / "blob.csv").string());
  const Dataset back = load_csv((dir / "blob.csv").string(), "label");
  CHECK(back.n_samples() == ds.n_samples());
  CHECK(back.n_classes == ds.n_classes);
  CHECK((back.features - ds.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.labels == ds.labels);
  fs::remove_all(dir);
}

TEST_CASE("make_blobs is deterministic and balanced") {
  const Dataset a = make_blobs(101, 6, 4, 1.5, 99);
  const Dataset b = make_blobs(101, 6, 4, 1.5, 99);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < a.n_samples(); ++i) ++counts[static_cast<std::size_t>(a.labels(i))];
  // 101 = 26 + 25 + 25 + 25, remainder goes to the low classes
  CHECK(counts == std::vector<int>{26, 25, 25, 25});
  const Dataset c = make_blobs(101, 6, 4, 1.5, 100);
  CHECK(a.features != c.features);
}

TEST_CASE("make_blobs clusters are separable by their own centroids at small spread") {
  const Dataset ds = make_blobs(300, 4, 3, 0.1, 17);
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(3, 4);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < ds.n_samples(); ++i) {
    centroids.row(ds.labels(i)) += ds.features.row(i);
    counts(ds.labels(i)) += 1.0;
  }
  for (int c = 0; c < 3; ++c) centroids.row(c) /= counts(c);
  int correct = 0;
  for (int i = 0; i < ds.n_samples(); ++i) {
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if ((ds.features.row(i) - centroids.row(c)).squaredNorm() <
          (ds.features.row(i) - centroids.row(best)).squaredNorm())
        best = c;
    correct += best == ds.labels(i);
  }
  CHECK(correct == ds.n_samples());
}

TEST_CASE("gather_rows and gather_labels pick the requested slice") {
  const Dataset ds = cyclic_dataset(10, 2);
  const std::vector<int> idx = {1, 4, 7};
  const Eigen::MatrixXd rows = gather_rows<double>(ds.features, idx);
  CHECK(rows.rows() == 3);
  CHECK(rows(2, 0) == ds.features(7, 0));
  const Eigen::VectorXi labs = gather_labels(ds.labels, idx);
  CHECK(labs(0) == ds.labels(1));
  CHECK(labs(2) == ds.labels(7));
}
