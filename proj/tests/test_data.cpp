#include "scfl/data.hpp"

#include "scfl/csv.hpp"
#include "scfl/training.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

using namespace scfl;

namespace {

// Normal-equations oracle, naive loops: W = (X^T X)^{-1} X^T Y.
Matrix normal_equations_oracle(const Dataset& ds) {
  const Index d = ds.feature_dim(), o = ds.label_dim(), m = ds.samples();
  Matrix xtx = Matrix::Zero(d, d), xty = Matrix::Zero(d, o);
  for (Index i = 0; i < m; ++i)
    for (Index a = 0; a < d; ++a) {
      for (Index b = 0; b < d; ++b) xtx(a, b) += ds.features(i, a) * ds.features(i, b);
      for (Index b = 0; b < o; ++b) xty(a, b) += ds.features(i, a) * ds.labels(i, b);
    }
  return xtx.fullPivLu().solve(xty);
}

std::string temp_path(const char* name) {
  return std::string("/tmp/scfl_test_") + name;
}

}  // namespace

TEST_CASE("synthetic generation is a pure function of the seed") {
  const Dataset a = generate_synthetic(7, 40, 5, 1, 0.0);
  const Dataset b = generate_synthetic(7, 40, 5, 1, 0.0);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const Dataset c = generate_synthetic(8, 40, 5, 1, 0.0);
  CHECK(a.features != c.features);
}

TEST_CASE("noiseless synthetic data is exactly solvable") {
  const Dataset ds = generate_synthetic(7, 40, 5, 1, 0.0);
  const auto sol = solve_optimal(ds);
  CHECK((ds.features * sol.w - ds.labels).norm() < 1e-9);
}

TEST_CASE("least squares recovers the true model under mild noise") {
  Matrix w_true;
  const Dataset ds = generate_synthetic(7, 40, 5, 1, 0.1, &w_true);
  const Matrix w_star = normal_equations_oracle(ds);
  CHECK((w_star - w_true).cwiseAbs().maxCoeff() < 0.2);
  // and the production solver agrees with the oracle
  const auto sol = solve_optimal(ds);
  CHECK((sol.w - w_star).norm() < 1e-8);
}

TEST_CASE("synthetic features satisfy the normalization assumption") {
  const Dataset ds = generate_synthetic(3, 30, 4, 2, 0.3);
  CHECK(ds.features.cwiseAbs().maxCoeff() == 1.0);
}

TEST_CASE("csv echo") {
  const auto path = temp_path("echo.csv");
  {
    std::ofstream out(path);
    out << "f0,y0\n1,1\n2,2\n";
  }
  const Dataset ds = load_csv(path, 1, 1);
  CHECK(ds.samples() == 2);
  CHECK(ds.features(0, 0) == 1.0);
  CHECK(ds.features(1, 0) == 2.0);
  CHECK(ds.labels(0, 0) == 1.0);
  CHECK(ds.labels(1, 0) == 2.0);
  std::remove(path.c_str());
}

TEST_CASE("csv header mismatch names the offending column") {
  const auto path = temp_path("badheader.csv");
  {
    std::ofstream out(path);
    out << "f0,label\n1,1\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path, 1, 1),
                       doctest::Contains("'label'"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("csv non-numeric cell is located") {
  const auto path = temp_path("badcell.csv");
  {
    std::ofstream out(path);
    out << "f0,y0\n1,abc\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path, 1, 1), doctest::Contains("row 2"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("csv round-trip is bit exact") {
  const auto path = temp_path("roundtrip.csv");
  const Dataset ds = generate_synthetic(17, 23, 3, 2, 0.7);
  save_csv(path, ds);
  const Dataset back = load_csv(path, 3, 2);
  CHECK(ds.features == back.features);
  CHECK(ds.labels == back.labels);
  std::remove(path.c_str());
}

TEST_CASE("normalize scales by the max absolute entry") {
  Dataset ds;
  ds.features.resize(2, 1);
  ds.features << 2.0, -4.0;
  ds.labels = Matrix::Zero(2, 1);
  const Dataset out = normalize(ds);
  CHECK(out.features(0, 0) == 0.5);
  CHECK(out.features(1, 0) == -1.0);
}

TEST_CASE("normalize is the identity on normalized data and idempotent") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds;
    ds.features = normal_matrix(rng, 6, 3, 2.0);
    ds.labels = normal_matrix(rng, 6, 1);
    const Dataset once = normalize(ds);
    CHECK(once.features.cwiseAbs().maxCoeff() == 1.0);
    const Dataset twice = normalize(once);
    CHECK(once.features == twice.features);
  }
}

TEST_CASE("normalize rejects an all-zero feature matrix") {
  Dataset ds;
  ds.features = Matrix::Zero(3, 2);
  ds.labels = Matrix::Zero(3, 1);
  CHECK_THROWS_AS(normalize(ds), std::invalid_argument);
}

TEST_CASE("single-device partition is one range") {
  const Dataset ds = generate_synthetic(5, 12, 2, 1, 0.0);
  const auto [sorted, part] = partition_noniid(ds, 1, {}, 3);
  CHECK(part.device_count() == 1);
  CHECK(part.ranges[0].begin == 0);
  CHECK(part.ranges[0].size == 12);
}

TEST_CASE("label-sorted split is label-pure on balanced binary labels") {
  Dataset ds;
  ds.features = Matrix::Random(10, 2);
  ds.labels.resize(10, 1);
  for (Index i = 0; i < 10; ++i) ds.labels(i, 0) = (i % 2 == 0) ? 0.0 : 1.0;
  const auto [sorted, part] = partition_noniid(ds, 2, {}, 9);
  for (Index dev = 0; dev < 2; ++dev) {
    const auto labels = part.labels_of(sorted, dev);
    for (Index i = 1; i < labels.rows(); ++i) CHECK(labels(i, 0) == labels(0, 0));
  }
}

TEST_CASE("partition covers all rows for any device count") {
  const Dataset ds = generate_synthetic(19, 29, 3, 1, 0.2);
  for (Index n : {1, 2, 3, 5, 7, 29}) {
    const auto [sorted, part] = partition_noniid(ds, n, {}, 11);
    Index total = 0;
    for (const auto& r : part.ranges) total += r.size;
    CHECK(total == 29);
    CHECK_NOTHROW(validate_partition(part, 29));
    // reordering preserved the multiset of rows
    CHECK(sorted.features.sum() == doctest::Approx(ds.features.sum()).epsilon(1e-12));
  }
}

TEST_CASE("partition rejects more devices than samples") {
  const Dataset ds = generate_synthetic(2, 4, 2, 1, 0.0);
  CHECK_THROWS_AS(partition_noniid(ds, 5, {}, 1), std::invalid_argument);
}

TEST_CASE("seeded partition is deterministic and seed-sensitive") {
  const Dataset ds = generate_synthetic(23, 40, 2, 1, 0.5);
  const auto [s1, p1] = partition_noniid(ds, 4, {}, 100);
  const auto [s2, p2] = partition_noniid(ds, 4, {}, 100);
  CHECK(s1.features == s2.features);
  bool seen_different = false;
  for (Seed seed = 101; seed < 110 && !seen_different; ++seed) {
    const auto [s3, p3] = partition_noniid(ds, 4, {}, seed);
    seen_different = s3.features != s1.features;
  }
  CHECK(seen_different);
}

TEST_CASE("multi-shard devices still get contiguous ranges") {
  const Dataset ds = generate_synthetic(29, 24, 2, 1, 0.5);
  LabelSortSpec spec;
  spec.shards_per_device = 3;
  const auto [sorted, part] = partition_noniid(ds, 2, spec, 5);
  CHECK_NOTHROW(validate_partition(part, 24));
  CHECK(part.ranges[0].size == 12);
}
