#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/QR>
#include <doctest.h>

#include "manifold_id/fishers.hpp"
#include "manifold_id/rng.hpp"

using namespace manifold_id;

namespace {

RowMatrixXd gaussian(Index n, Index d, std::uint64_t seed) {
  const CounterRng rng(seed, "test/gauss");
  RowMatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) x(i, c) = rng.normal(i, c);
  }
  return x;
}

RowMatrixXd unit_rows(RowMatrixXd x) {
  for (Index i = 0; i < x.rows(); ++i) x.row(i) /= x.row(i).norm();
  return x;
}

// P(<x, y> > alpha) for independent uniform points on S^(n-1), by Simpson
// integration of the projected density.
double cap_probability(double alpha, int n) {
  const double c = std::exp(std::lgamma(n / 2.0) - std::lgamma((n - 1) / 2.0)) / std::sqrt(std::numbers::pi);
  const int steps = 20000;
  const double h = (1.0 - alpha) / steps;
  double s = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = alpha + i * h;
    const double f = std::pow(std::max(0.0, 1.0 - t * t), (n - 3) / 2.0);
    s += f * (i == 0 || i == steps ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return c * s * h / 3.0;
}

std::vector<double> naive_p_bar(const RowMatrixXd& x, const std::vector<double>& alphas) {
  const Index n = x.rows();
  std::vector<double> out(alphas.size(), 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (Index c = 0; c < x.cols(); ++c) dot += x(i, c) * x(j, c);
      for (std::size_t a = 0; a < alphas.size(); ++a) out[a] += dot > alphas[a] ? 1.0 : 0.0;
    }
  }
  for (auto& v : out) v /= static_cast<double>(n) * static_cast<double>(n);
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_SUITE("fishers") {

TEST_CASE("alpha grids") {
  const auto g = default_alpha_grid();
  REQUIRE(g.size() == 49);
  CHECK(g.front() == doctest::Approx(0.02));
  CHECK(g.back() == doctest::Approx(0.98));
  const auto r = parse_alpha_grid("0.1:0.5:0.1");
  REQUIRE(r.size() == 5);
  CHECK(r[4] == doctest::Approx(0.5));
  CHECK(parse_alpha_grid("0.2,0.4,0.9").size() == 3);
  CHECK_THROWS_AS(parse_alpha_grid("0.4,0.2"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid("0,0.5"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid("0.5,1"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid("0.1:0.5:0"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid("abc"), ConfigError);
  CHECK_THROWS_AS(parse_alpha_grid(""), ConfigError);
}

TEST_CASE("standardize") {
  const auto iso = standardize(gaussian(5000, 5, 1));
  CHECK(iso.retained_dims == 5);
  CHECK(iso.x.cols() == 5);
  for (Index i = 0; i < iso.x.rows(); ++i) REQUIRE(std::abs(iso.x.row(i).norm() - 1.0) < 1e-12);
  CHECK(iso.eigenvalues(0) >= iso.eigenvalues(4));

  const RowMatrixXd flat = gaussian(2000, 2, 2);
  Eigen::MatrixXd basis = gaussian(10, 2, 3);
  const RowMatrixXd plane = flat * basis.transpose();
  const auto p = standardize(plane);
  CHECK(p.retained_dims == 2);

  // Whitened coordinates before projection have identity covariance, so a
  // strongly anisotropic input keeps only the dominant directions at C = 10.
  RowMatrixXd aniso = gaussian(3000, 4, 4);
  aniso.col(0) *= 10.0;
  aniso.col(1) *= 9.0;
  aniso.col(2) *= 1.0;
  aniso.col(3) *= 0.5;
  CHECK(standardize(aniso).retained_dims == 2);
  CHECK(standardize(aniso, 1000.0).retained_dims == 4);

  CHECK_THROWS_AS(standardize(RowMatrixXd::Constant(10, 3, 2.0)), DegenerateDataError);
  CHECK_THROWS_AS(standardize(gaussian(1, 3, 5)), DegenerateDataError);
  CHECK_THROWS_AS(standardize(gaussian(10, 3, 5), 0.5), ConfigError);
}

TEST_CASE("separability profile small fixtures") {
  const std::vector<double> grid = default_alpha_grid();
  RowMatrixXd anti(2, 3);
  anti << 0, 0, 1, 0, 0, -1;
  const auto pa = separability_profile(anti, grid, true);
  for (double v : pa.p_bar) CHECK(v == 0.0);
  CHECK(pa.alpha_star_index == -1);
  CHECK((pa.p_point->array() == 0.0).all());

  const Index n = 7;
  RowMatrixXd same(n, 3);
  for (Index i = 0; i < n; ++i) same.row(i) = Eigen::RowVector3d(0.6, 0.0, 0.8);
  const auto ps = separability_profile(same, grid, true);
  for (std::size_t a = 0; a < grid.size(); ++a) {
    CHECK(ps.p_bar[a] == doctest::Approx((n - 1.0) / n));
    for (Index i = 0; i < n; ++i) CHECK((*ps.p_point)(i, a) == doctest::Approx((n - 1.0) / n));
  }
  CHECK_THROWS_AS(separability_profile(same, std::vector<double>{}), ConfigError);
}

TEST_CASE("separability profile matches pair counting") {
  const std::vector<double> grid = default_alpha_grid();
  for (Index d : {3, 12, 24, 60}) {
    const RowMatrixXd x = unit_rows(gaussian(1500, d, 10 + static_cast<std::uint64_t>(d)));
    const auto prof = separability_profile(x, grid, true);
    const auto want = naive_p_bar(x, grid);
    CAPTURE(d);
    for (std::size_t a = 0; a < grid.size(); ++a) {
      REQUIRE(prof.p_bar[a] == want[a]);
      CHECK(prof.p_point->col(static_cast<Index>(a)).mean() == doctest::Approx(prof.p_bar[a]).epsilon(1e-12));
      if (a > 0) CHECK(prof.p_bar[a] <= prof.p_bar[a - 1]);
    }
  }
}

TEST_CASE("separability on S9") {
  const RowMatrixXd x = unit_rows(gaussian(10000, 10, 21));
  const std::vector<double> grid{0.6};
  const auto prof = separability_profile(x, grid);
  CHECK(p_bar_sphere(0.6, 10.0) == doctest::Approx(0.0282).epsilon(1e-3));
  const double exact = cap_probability(0.6, 10) * (10000.0 - 1.0) / 10000.0;
  CHECK(std::abs(prof.p_bar[0] - exact) < 5e-4);
  CHECK(std::abs(prof.p_bar[0] - 0.0282) < 0.1 * 0.0282);
}

TEST_CASE("Lambert W") {
  CHECK(lambert_w0(0.0) == 0.0);
  CHECK(lambert_w0(std::numbers::e) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lambert_w0(-1.0 / std::numbers::e) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK_THROWS_AS(lambert_w0(-0.5), ConfigError);
  const CounterRng rng(3, "test/lambert");
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = rng.uniform(i);
    double x = 0.0;
    if (i % 3 == 0) x = -1.0 / std::numbers::e + u * (1.0 / std::numbers::e);
    else if (i % 3 == 1) x = u * 10.0;
    else x = std::exp(u * 700.0);
    const double w = lambert_w0(x);
    REQUIRE(std::abs(w * std::exp(w) - x) / std::max(1.0, std::abs(x)) < 1e-12);
    REQUIRE(w >= -1.0);
  }
}

TEST_CASE("dimension inversion round trips") {
  CHECK(invert_dimension(p_bar_sphere(0.6, 10.0), 0.6) == doctest::Approx(10.0).epsilon(0.02));
  CHECK(std::abs(invert_dimension(0.0282, 0.6) - 10.0) <= 0.2);
  CHECK(invert_dimension(p_bar_sphere(0.8, 2.0), 0.8) == doctest::Approx(2.0).epsilon(0.02));
  for (double a : {0.4, 0.6, 0.8}) {
    for (double n : {2.0, 5.0, 10.0, 50.0}) {
      CHECK(std::abs(invert_dimension(p_bar_sphere(a, n), a) - n) <= 0.02 * n);
    }
  }
  CHECK_THROWS_AS(invert_dimension(0.0, 0.5), DegenerateDataError);
  CHECK_THROWS_AS(invert_dimension(0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(p_bar_sphere(0.0, 3.0), ConfigError);
}

TEST_CASE("alpha star selection") {
  SeparabilityProfile p;
  p.alphas = default_alpha_grid();
  p.p_bar.assign(p.alphas.size(), 0.0);
  for (std::size_t a = 0; a < p.alphas.size(); ++a) {
    if (p.alphas[a] < 0.71) p.p_bar[a] = 0.3 * (1.0 - p.alphas[a]);
  }
  finalize_profile(p);
  // max alpha with p > 0 is 0.70; 0.9 * 0.70 = 0.63, nearest grid point 0.62 or 0.64.
  CHECK(std::abs(p.alpha_star - 0.63) <= 0.0100001);
  CHECK(std::isnan(p.n_hat.back()));
  p.p_bar[3] = 0.9;
  CHECK_THROWS_AS(finalize_profile(p), Error);
}

TEST_CASE("FisherS global on known spheres") {
  const RowMatrixXd s2 = unit_rows(gaussian(5000, 3, 31));
  const auto r2 = fishers_global(s2);
  // Uniform data on the sphere of R^n reads as n after standardization.
  CHECK(r2.dimension == doctest::Approx(3.0).epsilon(0.1));
  CHECK(r2.profile.retained_dims == 3);
  const RowMatrixXd s9 = unit_rows(gaussian(8000, 10, 32));
  CHECK(fishers_global(s9).dimension == doctest::Approx(10.0).epsilon(0.1));
  CHECK(fishers_global(gaussian(5000, 2, 33)).dimension == doctest::Approx(2.0).epsilon(0.1));
  CHECK_THROWS_AS(fishers_global(RowMatrixXd::Constant(5, 2, 1.0)), DegenerateDataError);
}

TEST_CASE("FisherS invariances") {
  const RowMatrixXd x = gaussian(3000, 6, 41);
  const CounterRng rng(42, "test/rot");
  Eigen::MatrixXd g(6, 6);
  for (Index r = 0; r < 6; ++r) {
    for (Index c = 0; c < 6; ++c) g(r, c) = rng.normal(r, c);
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const double base = fishers_global(x).dimension;
  CHECK(std::abs(fishers_global(RowMatrixXd(x * q.transpose())).dimension - base) < 1e-6);
  CHECK(std::abs(fishers_global(RowMatrixXd(7.5 * x)).dimension - base) < 1e-6);
}

TEST_CASE("FisherS local") {
  // Regular polygon: every point sees the same configuration.
  const Index n = 350;
  RowMatrixXd ring(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    ring(i, 0) = std::cos(t);
    ring(i, 1) = std::sin(t);
  }
  const auto m = fishers_local(ring, 10.0, {}, 0.5);
  CHECK(m.defined_count() == n);
  for (Index i = 1; i < n; ++i) CHECK(m.values[i] == doctest::Approx(m.values[0]).epsilon(1e-12));

  // Union of a 2-D and an 8-D population in disjoint coordinates.
  RowMatrixXd mixed = RowMatrixXd::Zero(4000, 10);
  const RowMatrixXd low = gaussian(2000, 2, 51);
  const RowMatrixXd high = gaussian(2000, 8, 52);
  mixed.topLeftCorner(2000, 2) = low;
  mixed.bottomRightCorner(2000, 8) = high;
  const auto mm = fishers_local(mixed);
  std::vector<double> a, b;
  for (Index i = 0; i < 4000; ++i) {
    if (!mm.defined[i]) continue;
    (i < 2000 ? a : b).push_back(mm.values[i]);
  }
  REQUIRE(a.size() > 1000);
  REQUIRE(b.size() > 1000);
  CHECK(median(a) + 2.0 < median(b));

  // Points separable at the margin are flagged, not numeric.
  RowMatrixXd sparse(4, 2);
  sparse << 1, 0, -1, 0, 0.999, 0.04, 0, 1;
  const auto ms = fishers_local(sparse, 10.0, {}, 0.9);
  CHECK(ms.defined_count() < 4);
  for (Index i = 0; i < 4; ++i) {
    if (!ms.defined[i]) CHECK(std::isnan(ms.values[i]));
  }
}

}  // TEST_SUITE
