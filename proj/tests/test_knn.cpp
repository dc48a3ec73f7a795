#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include <doctest.h>

#include "manifold_id/knn.hpp"
#include "manifold_id/rng.hpp"

using namespace manifold_id;

namespace {

// Sorts every other row by (squared distance, index).
NeighborTable naive_knn(const RowMatrixXd& x, Index k) {
  const Index n = x.rows();
  NeighborTable t;
  t.k = k;
  t.idx.resize(n, k);
  t.radii.resize(n, k);
  std::vector<std::pair<double, Index>> all;
  for (Index i = 0; i < n; ++i) {
    all.clear();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (Index c = 0; c < x.cols(); ++c) {
        const double d = x(i, c) - x(j, c);
        s += d * d;
      }
      all.emplace_back(s, j);
    }
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    for (Index c = 0; c < k; ++c) {
      t.idx(i, c) = all[c].second;
      t.radii(i, c) = std::sqrt(all[c].first);
    }
  }
  return t;
}

RowMatrixXd make_data(Index n, Index d, std::uint64_t seed, bool lattice) {
  const CounterRng rng(seed, "test/knn");
  RowMatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) {
      x(i, c) = lattice ? std::floor(rng.uniform(i, c) * 4.0) : rng.normal(i, c) * (c % 3 + 1);
    }
  }
  return x;
}

RowMatrixXd unique_rows(const RowMatrixXd& x) {
  const auto d = dedup_rows(EmbeddingMatrix{x, ""});
  return d.emb.data;
}

}  // namespace

TEST_SUITE("knn") {

TEST_CASE("dedup keeps first occurrences") {
  RowMatrixXd x(4, 2);
  x << 0, 1, 2, 3, 4, 5, 6, 7;
  auto r = dedup_rows(EmbeddingMatrix{x, ""});
  CHECK(r.kept == std::vector<Index>{0, 1, 2, 3});
  CHECK(r.emb.data == x);

  RowMatrixXd same = RowMatrixXd::Constant(6, 3, 1.5);
  r = dedup_rows(EmbeddingMatrix{same, ""});
  CHECK(r.kept == std::vector<Index>{0});
  CHECK(r.emb.rows() == 1);

  const CounterRng rng(4, "test/dedup");
  RowMatrixXd mixed(300, 3);
  for (Index i = 0; i < 300; ++i) {
    for (Index c = 0; c < 3; ++c) mixed(i, c) = std::floor(rng.uniform(i, c) * 3.0);
  }
  std::vector<Index> expected;
  std::set<std::vector<double>> seen;
  for (Index i = 0; i < 300; ++i) {
    std::vector<double> row(mixed.row(i).data(), mixed.row(i).data() + 3);
    if (seen.insert(row).second) expected.push_back(i);
  }
  r = dedup_rows(EmbeddingMatrix{mixed, ""});
  CHECK(r.kept == expected);
  for (std::size_t j = 0; j < expected.size(); ++j) CHECK(r.emb.data.row(j) == mixed.row(expected[j]));

  RowMatrixXd zeros(2, 1);
  zeros << 0.0, -0.0;
  CHECK(dedup_rows(EmbeddingMatrix{zeros, ""}).kept.size() == 1);
}

TEST_CASE("hand example on a line") {
  RowMatrixXd x(3, 1);
  x << 0, 1, 3;
  const auto t = knn_exact(x, 1);
  CHECK(t.idx(0, 0) == 1);
  CHECK(t.idx(1, 0) == 0);
  CHECK(t.idx(2, 0) == 1);
  CHECK(t.radii(0, 0) == 1.0);
  CHECK(t.radii(1, 0) == 1.0);
  CHECK(t.radii(2, 0) == 2.0);
  CHECK(t.excluded_self);
}

TEST_CASE("ties break toward the lower index") {
  RowMatrixXd x(4, 2);
  x << 0, 0, 1, 0, -1, 0, 0, 1;
  const auto t = knn_exact(x, 3);
  CHECK(t.idx(0, 0) == 1);
  CHECK(t.idx(0, 1) == 2);
  CHECK(t.idx(0, 2) == 3);
}

TEST_CASE("preconditions") {
  RowMatrixXd x = make_data(10, 3, 1, false);
  CHECK_THROWS_AS(knn_exact(x, 10), ConfigError);
  CHECK_THROWS_AS(knn_exact(x, 0), ConfigError);
  RowMatrixXd dup = make_data(10, 3, 1, false);
  dup.row(7) = dup.row(2);
  CHECK_THROWS_AS(knn_exact(dup, 2), DegenerateDataError);
  RowMatrixXd dup_wide = make_data(300, 40, 2, false);
  dup_wide.row(250) = dup_wide.row(3);
  CHECK_THROWS_AS(knn_exact(dup_wide, 2), DegenerateDataError);
}

TEST_CASE("blocked kNN equals the naive oracle on 500 instances") {
  const CounterRng rng(99, "test/knn-instances");
  int checked = 0;
  for (std::uint64_t inst = 0; inst < 500; ++inst) {
    const auto n = static_cast<Index>(std::exp(std::log(10.0) + rng.uniform(inst, 0) * std::log(2000.0 / 10.0)));
    const auto d = static_cast<Index>(1 + rng.uniform(inst, 1) * 64);
    const bool lattice = inst % 5 == 0;
    const RowMatrixXd x = unique_rows(make_data(n, std::min<Index>(d, 64), inst, lattice));
    if (x.rows() < 3) continue;
    const Index k = std::min<Index>(x.rows() - 1, 1 + static_cast<Index>(rng.uniform(inst, 2) * 30));
    const auto got = knn_exact(x, k);
    const auto want = naive_knn(x, k);
    REQUIRE(got.idx == want.idx);
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index c = 0; c < k; ++c) {
        REQUIRE(std::abs(got.radii(i, c) - want.radii(i, c)) <= 1e-9 * want.radii(i, c));
      }
    }
    ++checked;
  }
  CHECK(checked >= 450);
}

TEST_CASE("large screened instance matches the oracle") {
  const RowMatrixXd x = make_data(3000, 48, 17, false);
  const auto got = knn_exact(x, 20);
  const auto want = naive_knn(x, 20);
  CHECK(got.idx == want.idx);
  CHECK((got.radii - want.radii).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("prefix") {
  const RowMatrixXd x = make_data(200, 5, 3, false);
  const auto t = knn_exact(x, 10);
  const auto p = t.prefix(4);
  CHECK(p.k == 4);
  CHECK(p.idx == t.idx.leftCols(4));
  CHECK(p.radii == t.radii.leftCols(4));
  CHECK(knn_exact(x, 4).idx == p.idx);
  CHECK_THROWS_AS(t.prefix(11), ConfigError);
}

TEST_CASE("permutation symmetric input gives a consistent table") {
  // Closed under negation: row i + n/2 is -row i.
  const RowMatrixXd half = make_data(100, 6, 8, false);
  RowMatrixXd x(200, 6);
  x.topRows(100) = half;
  x.bottomRows(100) = -half;
  const auto t = knn_exact(x, 8);
  for (Index i = 0; i < 100; ++i) {
    for (Index c = 0; c < 8; ++c) {
      const Index j = t.idx(i, c);
      CHECK(t.idx(i + 100, c) == (j < 100 ? j + 100 : j - 100));
      CHECK(t.radii(i + 100, c) == t.radii(i, c));
    }
  }
}

TEST_CASE("neighbor directions") {
  RowMatrixXd sq(4, 2);
  sq << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto t = knn_exact(sq, 3);
  const auto dirs = neighbor_directions(sq, t, 0);
  REQUIRE(dirs.rows() == 3);
  CHECK(dirs(0, 0) == doctest::Approx(1.0));
  CHECK(dirs(0, 1) == doctest::Approx(0.0));
  CHECK(dirs(1, 0) == doctest::Approx(0.0));
  CHECK(dirs(1, 1) == doctest::Approx(1.0));
  CHECK(dirs(2, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(dirs(2, 1) == doctest::Approx(std::sqrt(0.5)));

  RowMatrixXd pair(2, 3);
  pair << 1, 2, 3, -1, -2, -3;
  const auto pt = knn_exact(pair, 1);
  const auto a = neighbor_directions(pair, pt, 0);
  const auto b = neighbor_directions(pair, pt, 1);
  CHECK((a + b).cwiseAbs().maxCoeff() < 1e-15);

  const RowMatrixXd x = make_data(300, 20, 5, false);
  const auto tx = knn_exact(x, 10);
  for (Index i = 0; i < 300; i += 37) {
    const auto d = neighbor_directions(x, tx, i);
    for (Index c = 0; c < 10; ++c) CHECK(d.row(c).norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(neighbor_directions(x, tx, 300), ConfigError);
}

}  // TEST_SUITE
