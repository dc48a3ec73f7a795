#include "manifold_id/fishers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "manifold_id/parallel.hpp"

namespace manifold_id {

namespace {

constexpr Index kStandardizeGrain = 4096;
constexpr Index kGramRows = 256;
constexpr Index kGramCols = 2048;
// At or below this dimension every product is evaluated exactly.
constexpr Index kDirectMaxDim = 16;

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw ConfigError("cannot parse alpha value '" + std::string(s) + "'");
  }
  return v;
}

void check_grid(std::span<const double> alphas) {
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  for (std::size_t m = 0; m < alphas.size(); ++m) {
    if (!(alphas[m] > 0.0 && alphas[m] < 1.0)) throw ConfigError("alpha values must lie in (0, 1)");
    if (m > 0 && !(alphas[m] > alphas[m - 1])) throw ConfigError("alpha grid must be strictly ascending");
  }
}

double exact_dot(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index c = 0; c < d; ++c) s += a[c] * b[c];
  return s;
}

// Pair histograms: bucket b = #{m : alpha_m < dot}. Bucket 0 is never
// stored since it contributes to no count.
class PairCounter {
 public:
  PairCounter(std::span<const double> alphas, Index n, bool per_point, int slots)
      : alphas_(alphas.begin(), alphas.end()),
        buckets_(static_cast<Index>(alphas.size()) + 1),
        per_point_(per_point),
        totals_(static_cast<std::size_t>(slots), std::vector<std::int64_t>(static_cast<std::size_t>(buckets_), 0)) {
    if (per_point_) {
      rows_.assign(static_cast<std::size_t>(slots), Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, buckets_));
    }
  }

  double first() const { return alphas_.front(); }

  Index bucket(double dot) const {
    return std::lower_bound(alphas_.begin(), alphas_.end(), dot) - alphas_.begin();
  }

  void add(int slot, Index i, Index j, Index b) {
    ++totals_[slot][b];
    if (per_point_) {
      ++rows_[slot](i, b);
      ++rows_[slot](j, b);
    }
  }

  // counts[m] = number of ordered pairs (i, j), i != j, with dot > alpha_m.
  std::vector<std::int64_t> ordered_pair_counts() const {
    std::vector<std::int64_t> hist(static_cast<std::size_t>(buckets_), 0);
    for (const auto& t : totals_) {
      for (Index b = 0; b < buckets_; ++b) hist[b] += t[b];
    }
    return tail_sums(hist, 2);
  }

  RowMatrixXd point_fractions(Index n) const {
    const Index m = buckets_ - 1;
    RowMatrixXd out(n, m);
    std::vector<std::int64_t> hist(static_cast<std::size_t>(buckets_));
    for (Index i = 0; i < n; ++i) {
      std::fill(hist.begin(), hist.end(), 0);
      for (const auto& r : rows_) {
        for (Index b = 0; b < buckets_; ++b) hist[b] += r(i, b);
      }
      const auto counts = tail_sums(hist, 1);
      for (Index a = 0; a < m; ++a) out(i, a) = static_cast<double>(counts[a]) / static_cast<double>(n);
    }
    return out;
  }

 private:
  std::vector<std::int64_t> tail_sums(const std::vector<std::int64_t>& hist, std::int64_t scale) const {
    const Index m = buckets_ - 1;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(m), 0);
    std::int64_t run = 0;
    for (Index a = m - 1; a >= 0; --a) {
      run += hist[a + 1];
      counts[a] = scale * run;
    }
    return counts;
  }

  std::vector<double> alphas_;
  Index buckets_;
  bool per_point_;
  std::vector<std::vector<std::int64_t>> totals_;
  std::vector<Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> rows_;
};

void count_direct(const RowMatrixXd& x, PairCounter& counter) {
  const Index n = x.rows();
  const Index d = x.cols();
  const Eigen::MatrixXd cols = x;
  const double first = counter.first();
  parallel_chunks_slotted(n, kGramRows, [&](int slot, Index, Index begin, Index end) {
    std::vector<double> acc(static_cast<std::size_t>(kGramCols));
    for (Index i = begin; i < end; ++i) {
      const double* xi = x.row(i).data();
      for (Index j0 = i + 1; j0 < n; j0 += kGramCols) {
        const Index len = std::min(kGramCols, n - j0);
        std::fill_n(acc.begin(), len, 0.0);
        for (Index c = 0; c < d; ++c) {
          const double* col = cols.col(c).data() + j0;
          const double v = xi[c];
          for (Index t = 0; t < len; ++t) acc[t] += v * col[t];
        }
        for (Index t = 0; t < len; ++t) {
          if (acc[t] <= first) continue;
          counter.add(slot, i, j0 + t, counter.bucket(acc[t]));
        }
      }
    }
  });
}

void count_screened(const RowMatrixXd& x, PairCounter& counter) {
  const Index n = x.rows();
  const Index d = x.cols();
  const RowMatrixXf xf = x.cast<float>();
  // Bound on |float Gram - exact product| for unit rows, with a factor two
  // of headroom; pairs closer than this to a margin are recomputed exactly.
  const double delta = static_cast<double>(d + 4) * 0x1.0p-23;
  const double first = counter.first();

  parallel_chunks_slotted(n, kGramRows, [&](int slot, Index, Index begin, Index end) {
    const Index rows = end - begin;
    RowMatrixXf gram(rows, kGramCols);
    for (Index j0 = begin; j0 < n; j0 += kGramCols) {
      const Index len = std::min(kGramCols, n - j0);
      gram.leftCols(len).noalias() = xf.middleRows(begin, rows) * xf.middleRows(j0, len).transpose();
      for (Index r = 0; r < rows; ++r) {
        const Index i = begin + r;
        const Index t0 = std::max<Index>(0, i + 1 - j0);
        for (Index t = t0; t < len; ++t) {
          const double g = gram(r, t);
          if (g + delta <= first) continue;
          const Index lo = counter.bucket(g - delta);
          const Index hi = counter.bucket(g + delta);
          const Index j = j0 + t;
          const Index b = lo == hi ? lo : counter.bucket(exact_dot(x.row(i).data(), x.row(j).data(), d));
          if (b > 0) counter.add(slot, i, j, b);
        }
      }
    }
  });
}

}  // namespace

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int m = 1; m <= 49; ++m) grid.push_back(0.02 * m);
  return grid;
}

std::vector<double> parse_alpha_grid(std::string_view text) {
  std::vector<double> grid;
  if (text.find(':') != std::string_view::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos) throw ConfigError("alpha grid range must be lo:hi:step");
    const double lo = parse_double(text.substr(0, c1));
    const double hi = parse_double(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = parse_double(text.substr(c2 + 1));
    if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("alpha grid range needs lo <= hi and step > 0");
    const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int m = 0; m < count; ++m) grid.push_back(lo + step * m);
  } else {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto comma = text.find(',', start);
      if (comma == std::string_view::npos) comma = text.size();
      grid.push_back(parse_double(text.substr(start, comma - start)));
      start = comma + 1;
    }
  }
  check_grid(grid);
  return grid;
}

Standardized standardize(const RowMatrixXd& data, double C) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (n < 2 || d < 1) throw DegenerateDataError("standardization needs at least 2 rows");
  if (!(C >= 1.0)) throw ConfigError("eigenvalue ratio C must be >= 1");

  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
  for (Index i = 0; i < n; ++i) mean += data.row(i);
  mean /= static_cast<double>(n);

  // Per-chunk scatter matrices summed in chunk order.
  const Index chunks = chunk_count(n, kStandardizeGrain);
  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(chunks));
  parallel_chunks(n, kStandardizeGrain, [&](Index c, Index begin, Index end) {
    const RowMatrixXd block = data.middleRows(begin, end - begin).rowwise() - mean;
    partial[c].noalias() = block.transpose() * block;
  });
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (auto& p : partial) {
    cov += p;
    p.resize(0, 0);
  }
  cov /= static_cast<double>(n - 1);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DegenerateDataError("covariance eigendecomposition failed");
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const double lambda_max = values(0);
  if (!(lambda_max > 0.0)) throw DegenerateDataError("input has zero variance");
  Index kept = 0;
  while (kept < d && values(kept) >= lambda_max / C) ++kept;
  if (kept == 0) throw DegenerateDataError("no principal component retained");

  Eigen::MatrixXd projection(d, kept);
  for (Index c = 0; c < kept; ++c) {
    projection.col(c) = eig.eigenvectors().col(d - 1 - c) / std::sqrt(values(c));
  }

  Standardized out;
  out.retained_dims = kept;
  out.eigenvalues = values;
  out.x.resize(n, kept);
  parallel_chunks(n, kStandardizeGrain, [&](Index, Index begin, Index end) {
    const RowMatrixXd block = data.middleRows(begin, end - begin).rowwise() - mean;
    out.x.middleRows(begin, end - begin).noalias() = block * projection;
    for (Index i = begin; i < end; ++i) {
      const double norm = std::sqrt(exact_dot(out.x.row(i).data(), out.x.row(i).data(), kept));
      if (!(norm > 0.0)) {
        throw DegenerateDataError("row " + std::to_string(i) + " coincides with the sample mean after whitening");
      }
      out.x.row(i) /= norm;
    }
  });
  return out;
}

SeparabilityProfile separability_profile(const RowMatrixXd& x_unit, std::span<const double> alphas, bool per_point) {
  check_grid(alphas);
  const Index n = x_unit.rows();
  if (n < 2) throw DegenerateDataError("separability needs at least 2 points");

  PairCounter counter(alphas, n, per_point, planned_workers(n, kGramRows));
  if (x_unit.cols() <= kDirectMaxDim) {
    count_direct(x_unit, counter);
  } else {
    count_screened(x_unit, counter);
  }

  SeparabilityProfile profile;
  profile.alphas.assign(alphas.begin(), alphas.end());
  profile.n = n;
  profile.retained_dims = x_unit.cols();
  const auto counts = counter.ordered_pair_counts();
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  for (std::size_t m = 0; m < alphas.size(); ++m) profile.p_bar.push_back(static_cast<double>(counts[m]) / nn);
  if (per_point) profile.p_point = counter.point_fractions(n);
  finalize_profile(profile);
  return profile;
}

double lambert_w0(double x) {
  constexpr double kInvE = 1.0 / std::numbers::e;
  if (std::isnan(x) || x < -kInvE) throw ConfigError("Lambert W0 is undefined below -1/e");
  if (x == -kInvE) return -1.0;
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;

  double w = 0.0;
  if (x < -0.32) {
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (x < 3.0) {
    w = std::log1p(x);
    if (x > 0.0) w *= 1.0 - std::log1p(w) / (2.0 + w);
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  for (int iter = 0; iter < 64; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0 || f == 0.0) break;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(w))) break;
  }
  return w;
}

double p_bar_sphere(double alpha, double n) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(n > 0.0)) throw ConfigError("p_bar_sphere needs 0 < alpha < 1, n > 0");
  return std::pow(1.0 - alpha * alpha, 0.5 * (n - 1.0)) / (alpha * std::sqrt(2.0 * std::numbers::pi * n));
}

double invert_dimension(double p_bar, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(p_bar > 0.0)) throw DegenerateDataError("fully separable at this margin (p_bar = 0)");
  const double a2 = alpha * alpha;
  const double neg_log = -std::log1p(-a2);
  const double arg = neg_log / (2.0 * std::numbers::pi * p_bar * p_bar * a2 * (1.0 - a2));
  if (arg < -1.0 / std::numbers::e) throw DegenerateDataError("Lambert W argument below -1/e");
  return lambert_w0(arg) / neg_log;
}

void finalize_profile(SeparabilityProfile& profile) {
  const auto m = profile.alphas.size();
  profile.n_hat.assign(m, std::numeric_limits<double>::quiet_NaN());
  Index last = -1;
  for (std::size_t a = 0; a < m; ++a) {
    if (a > 0 && profile.p_bar[a] > profile.p_bar[a - 1]) {
      throw Error("separability profile is not monotone");
    }
    if (profile.p_bar[a] > 0.0) {
      profile.n_hat[a] = invert_dimension(profile.p_bar[a], profile.alphas[a]);
      last = static_cast<Index>(a);
    }
  }
  profile.alpha_star_index = -1;
  if (last < 0) return;
  const double target = 0.9 * profile.alphas[last];
  Index best = 0;
  for (Index a = 1; a <= last; ++a) {
    if (std::abs(profile.alphas[a] - target) < std::abs(profile.alphas[best] - target)) best = a;
  }
  profile.alpha_star_index = best;
  profile.alpha_star = profile.alphas[best];
}

FisherSResult fishers_global(const RowMatrixXd& data, double C, std::span<const double> alphas) {
  const std::vector<double> grid = alphas.empty() ? default_alpha_grid() : std::vector<double>(alphas.begin(), alphas.end());
  const Standardized s = standardize(data, C);
  FisherSResult out;
  out.profile = separability_profile(s.x, grid);
  if (out.profile.alpha_star_index < 0) throw DegenerateDataError("FisherS: data fully separable on the whole alpha grid");
  out.dimension = out.profile.n_hat[out.profile.alpha_star_index];
  return out;
}

LocalIdMap fishers_local(const RowMatrixXd& data, double C, std::span<const double> alphas,
                         std::optional<double> alpha) {
  const Standardized s = standardize(data, C);
  SeparabilityProfile profile;
  Index column = 0;
  if (alpha) {
    const double a = *alpha;
    profile = separability_profile(s.x, std::span<const double>(&a, 1), true);
  } else {
    const std::vector<double> grid =
        alphas.empty() ? default_alpha_grid() : std::vector<double>(alphas.begin(), alphas.end());
    profile = separability_profile(s.x, grid, true);
    if (profile.alpha_star_index < 0) throw DegenerateDataError("FisherS: data fully separable on the whole alpha grid");
    column = profile.alpha_star_index;
  }
  const double margin = profile.alphas[column];
  LocalIdMap map;
  map.estimator = Estimator::FisherS;
  map.values = Eigen::VectorXd::Constant(s.x.rows(), std::numeric_limits<double>::quiet_NaN());
  map.defined.assign(static_cast<std::size_t>(s.x.rows()), 0);
  for (Index i = 0; i < s.x.rows(); ++i) {
    const double p = (*profile.p_point)(i, column);
    if (!(p > 0.0)) continue;
    map.values(i) = invert_dimension(p, margin);
    map.defined[i] = 1;
  }
  if (map.defined_count() == 0) throw DegenerateDataError("FisherS: every point is separable at alpha = " + std::to_string(margin));
  return map;
}

}  // namespace manifold_id
