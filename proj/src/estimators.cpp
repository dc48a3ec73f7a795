#include "manifold_id/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "manifold_id/parallel.hpp"
#include "manifold_id/rng.hpp"

namespace manifold_id {

namespace {

constexpr Index kLocalGrain = 512;

void require_neighbors(std::span<const double> radii, std::size_t minimum) {
  if (radii.size() < minimum) {
    throw ConfigError("estimator needs at least " + std::to_string(minimum) + " neighbors");
  }
  if (!(radii.front() > 0.0)) throw DegenerateDataError("neighbor radii must be strictly positive");
}

}  // namespace

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Mle: return "mle";
    case Estimator::Mom: return "mom";
    case Estimator::Tle: return "tle";
    case Estimator::TwoNn: return "twonn";
    case Estimator::CorrInt: return "corrint";
    case Estimator::Ess: return "ess";
    case Estimator::FisherS: return "fishers";
  }
  return "unknown";
}

const std::vector<Estimator>& all_estimators() {
  static const std::vector<Estimator> all = {Estimator::CorrInt, Estimator::FisherS, Estimator::Mle, Estimator::Mom,
                                             Estimator::Tle,     Estimator::TwoNn,   Estimator::Ess};
  return all;
}

Estimator parse_estimator(std::string_view name) {
  for (Estimator e : all_estimators()) {
    if (estimator_name(e) == name) return e;
  }
  if (name == "fisher" || name == "fisher_s") return Estimator::FisherS;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

std::vector<Estimator> parse_estimator_list(std::string_view list) {
  if (list == "all") return all_estimators();
  std::vector<bool> wanted(all_estimators().size(), false);
  std::size_t start = 0;
  while (start <= list.size()) {
    auto comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    const auto name = list.substr(start, comma - start);
    if (!name.empty()) {
      const Estimator e = parse_estimator(name);
      const auto& all = all_estimators();
      wanted[std::find(all.begin(), all.end(), e) - all.begin()] = true;
    }
    start = comma + 1;
  }
  std::vector<Estimator> out;
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    if (wanted[i]) out.push_back(all_estimators()[i]);
  }
  if (out.empty()) throw ConfigError("estimator set is empty");
  return out;
}

bool uses_neighbors(Estimator e) {
  return e == Estimator::Mle || e == Estimator::Mom || e == Estimator::Tle || e == Estimator::TwoNn ||
         e == Estimator::Ess;
}

bool has_local_values(Estimator e) {
  return e == Estimator::Mle || e == Estimator::Mom || e == Estimator::Tle || e == Estimator::Ess ||
         e == Estimator::FisherS;
}

Index LocalIdMap::defined_count() const {
  return static_cast<Index>(std::count(defined.begin(), defined.end(), std::uint8_t{1}));
}

double mle_local(std::span<const double> radii) {
  require_neighbors(radii, 2);
  const std::size_t k = radii.size();
  const double rk = radii[k - 1];
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) sum += std::log(rk / radii[j]);
  if (!(sum > 0.0)) throw DegenerateNeighborhood("all neighbor radii are equal; MLE undefined");
  return static_cast<double>(k - 1) / sum;
}

double mom_local(std::span<const double> radii) {
  require_neighbors(radii, 2);
  const std::size_t k = radii.size();
  double sum = 0.0;
  for (double r : radii) sum += r;
  const double mean = sum / static_cast<double>(k);
  const double gap = radii[k - 1] - mean;
  if (!(gap > 0.0)) throw DegenerateNeighborhood("all neighbor radii are equal; MOM undefined");
  return mean / gap;
}

double tle_local(const RowMatrixXd& data, std::span<const Index> neighbors, std::span<const double> radii) {
  require_neighbors(radii, 2);
  if (neighbors.size() != radii.size()) throw ConfigError("neighbor and radius counts differ");
  const std::size_t k = radii.size();
  const double r = radii[k - 1];
  const double r2 = r * r;
  const double eps = kTleEpsilon * r;

  double sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double di = radii[i];
    const double di2 = di * di;
    const auto vi = data.row(neighbors[i]);
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double dj = radii[j];
      const double dj2 = dj * dj;
      const double v2 = (vi - data.row(neighbors[j])).squaredNorm();
      const double v = std::sqrt(v2);
      const double z2 = 2.0 * di2 + 2.0 * dj2 - v2;

      double s = 0.0;
      double t = 0.0;
      if (di == 0.0) {
        s = t = dj;
      } else if (dj == 0.0) {
        s = t = r * v / (r + v);
      } else if (v == 0.0) {
        s = t = r;
      } else if (di == r) {
        s = r * v2 / (r2 + v2 - dj2);
        t = r * z2 / (r2 + z2 - dj2);
      } else {
        const double denom = 2.0 * (r2 - di2);
        const double bs = di2 + v2 - dj2;
        const double bt = di2 + z2 - dj2;
        s = r * (std::sqrt(bs * bs + 4.0 * v2 * (r2 - di2)) - bs) / denom;
        t = r * (std::sqrt(bt * bt + 4.0 * z2 * (r2 - di2)) - bt) / denom;
      }
      if (s >= eps) {
        sum += std::log(s / r);
        ++terms;
      }
      if (t >= eps) {
        sum += std::log(t / r);
        ++terms;
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (radii[i] >= eps) {
      sum += 2.0 * std::log(radii[i] / r);
      terms += 2;
    }
  }
  if (terms == 0) throw DegenerateNeighborhood("no TLE terms survive the threshold");
  if (!(sum < 0.0)) throw DegenerateNeighborhood("TLE log-ratio sum vanishes (all radii equal)");
  return -static_cast<double>(terms) / sum;
}

double ess_reference(int d) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  if (d == 1) return 0.0;
  const double h = 0.5 * d;
  return std::exp(2.0 * std::lgamma(h) - std::lgamma(h + 0.5) - std::lgamma(h - 0.5));
}

double ess_invert(double s) {
  if (!std::isfinite(s) || s < -1e-12 || s > 1.0 + 1e-12) {
    throw DegenerateNeighborhood("ESS statistic outside [0, 1]");
  }
  if (s <= ess_reference(1)) return 1.0;
  if (s >= ess_reference(kEssMaxDimension)) return static_cast<double>(kEssMaxDimension);
  // The curve is strictly increasing; locate the bracketing integers.
  int lo = 1;
  int hi = kEssMaxDimension;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (ess_reference(mid) <= s) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double m_lo = ess_reference(lo);
  const double m_hi = ess_reference(hi);
  return lo + (s - m_lo) / (m_hi - m_lo);
}

double ess_statistic(const RowMatrixXd& data, std::span<const Index> neighbors) {
  const auto k = static_cast<Index>(neighbors.size());
  if (k < 2) throw ConfigError("ESS needs at least 2 neighbors");
  RowMatrixXd centered(k, data.cols());
  for (Index a = 0; a < k; ++a) centered.row(a) = data.row(neighbors[a]);
  const Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;
  const Eigen::MatrixXd gram = centered * centered.transpose();

  double sum = 0.0;
  Index pairs = 0;
  for (Index a = 0; a < k; ++a) {
    if (!(gram(a, a) > 0.0)) continue;
    for (Index b = a + 1; b < k; ++b) {
      if (!(gram(b, b) > 0.0)) continue;
      const double cosine = gram(a, b) / std::sqrt(gram(a, a) * gram(b, b));
      sum += std::sqrt(std::max(0.0, 1.0 - cosine * cosine));
      ++pairs;
    }
  }
  if (pairs == 0) throw DegenerateNeighborhood("ESS: neighbors coincide with their mean");
  return sum / static_cast<double>(pairs);
}

double ess_local(const RowMatrixXd& data, std::span<const Index> neighbors) {
  return ess_invert(ess_statistic(data, neighbors));
}

double mle_global(std::span<const double> locals) {
  if (locals.empty()) throw DegenerateDataError("no local estimates to pool");
  double inv = 0.0;
  for (double v : locals) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DegenerateDataError("local estimates must be finite and positive");
    inv += 1.0 / v;
  }
  return static_cast<double>(locals.size()) / inv;
}

TwoNnResult twonn_global(const NeighborTable& table) {
  if (table.k < 2) throw ConfigError("TwoNN needs k >= 2");
  TwoNnResult out;
  out.mu.resize(static_cast<std::size_t>(table.rows()));
  double sum = 0.0;
  for (Index i = 0; i < table.rows(); ++i) {
    const double r1 = table.radii(i, 0);
    if (!(r1 > 0.0)) throw DegenerateDataError("TwoNN: zero first-neighbor radius");
    const double mu = table.radii(i, 1) / r1;
    out.mu[i] = mu;
    if (mu == 1.0) continue;
    sum += std::log(mu);
    ++out.used;
  }
  if (out.used == 0) throw DegenerateDataError("TwoNN: every point has R2 = R1");
  out.dimension = static_cast<double>(out.used) / sum;
  return out;
}

double corrint_global(const RowMatrixXd& data, const CorrIntOptions& options) {
  const Index n = data.rows();
  if (n < 3) throw DegenerateDataError("correlation integral needs at least 3 points");
  if (!(options.lo_percentile > 0.0) || !(options.lo_percentile < options.hi_percentile) ||
      !(options.hi_percentile <= 100.0) || options.radii < 2 || options.subsample < 3) {
    throw ConfigError("invalid correlation-integral options");
  }

  // Partial Fisher-Yates draw of the subsample; identity when it covers n.
  const Index m = std::min(n, options.subsample);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (m < n) {
    const CounterRng rng(options.seed, "corrint/subsample");
    for (Index i = 0; i < m; ++i) {
      const auto span = static_cast<std::uint64_t>(n - i);
      const Index j = i + static_cast<Index>(rng.bits(static_cast<std::uint64_t>(i)) % span);
      std::swap(order[i], order[j]);
    }
  }

  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Index a = 0; a < m; ++a) {
    for (Index b = a + 1; b < m; ++b) {
      dist.push_back(std::sqrt(exact_squared_distance(data.row(order[a]).data(), data.row(order[b]).data(), data.cols())));
    }
  }
  std::sort(dist.begin(), dist.end());
  const auto pairs = static_cast<double>(dist.size());
  auto quantile = [&](double pct) {
    const auto pos = static_cast<std::size_t>(std::floor(pct / 100.0 * (pairs - 1.0)));
    return dist[std::min(pos, dist.size() - 1)];
  };
  const double r_lo = quantile(options.lo_percentile);
  const double r_hi = quantile(options.hi_percentile);
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) {
    throw DegenerateDataError("correlation integral: fewer than 2 usable radius bins (coincident points?)");
  }

  std::vector<double> xs;
  std::vector<double> ys;
  const double log_lo = std::log(r_lo);
  const double log_hi = std::log(r_hi);
  for (Index b = 0; b < options.radii; ++b) {
    const double lr = log_lo + (log_hi - log_lo) * static_cast<double>(b) / static_cast<double>(options.radii - 1);
    const double r = b == options.radii - 1 ? r_hi : std::exp(lr);
    const auto count = std::upper_bound(dist.begin(), dist.end(), r) - dist.begin();
    if (count == 0) continue;
    xs.push_back(std::log(r));
    ys.push_back(std::log(static_cast<double>(count) / pairs));
  }
  if (xs.size() < 2) throw DegenerateDataError("correlation integral: fewer than 2 usable radius bins");

  const double nx = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / nx;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / nx;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

LocalIdMap local_ids(const RowMatrixXd& data, const NeighborTable& table, Estimator estimator, Index k) {
  if (!has_local_values(estimator) || !uses_neighbors(estimator)) {
    throw ConfigError("estimator '" + std::string(estimator_name(estimator)) + "' has no neighbor-based local form");
  }
  if (k == 0) k = table.k;
  if (k < 2 || k > table.k) throw ConfigError("local estimation needs 2 <= k <= table k");
  const Index n = table.rows();
  LocalIdMap map;
  map.estimator = estimator;
  map.k = k;
  map.values = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  map.defined.assign(static_cast<std::size_t>(n), 0);

  parallel_chunks(n, kLocalGrain, [&](Index, Index begin, Index end) {
    std::vector<double> radii(static_cast<std::size_t>(k));
    std::vector<Index> nbrs(static_cast<std::size_t>(k));
    for (Index i = begin; i < end; ++i) {
      for (Index c = 0; c < k; ++c) {
        radii[c] = table.radii(i, c);
        nbrs[c] = table.idx(i, c);
      }
      try {
        double v = 0.0;
        switch (estimator) {
          case Estimator::Mle: v = mle_local(radii); break;
          case Estimator::Mom: v = mom_local(radii); break;
          case Estimator::Tle: v = tle_local(data, nbrs, radii); break;
          case Estimator::Ess: v = ess_local(data, nbrs); break;
          default: break;
        }
        if (std::isfinite(v) && v > 0.0) {
          map.values(i) = v;
          map.defined[i] = 1;
        }
      } catch (const DegenerateNeighborhood&) {
        // left undefined
      }
    }
  });
  return map;
}

double aggregate_global(const LocalIdMap& map) {
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < map.size(); ++i) {
    if (!map.defined[i]) continue;
    sum += map.estimator == Estimator::Mle ? 1.0 / map.values(i) : map.values(i);
    ++count;
  }
  if (count == 0) throw DegenerateDataError("no point has a defined local estimate");
  return map.estimator == Estimator::Mle ? static_cast<double>(count) / sum : sum / static_cast<double>(count);
}

std::vector<IdReport> ksweep(const EmbeddingMatrix& emb, Estimator estimator, std::span<const Index> k_list) {
  if (k_list.empty()) throw ConfigError("k list is empty");
  const Index k_max = *std::max_element(k_list.begin(), k_list.end());
  const DedupResult unique = dedup_rows(emb);
  if (k_max >= unique.emb.rows()) {
    throw ConfigError("max k = " + std::to_string(k_max) + " must be below n = " + std::to_string(unique.emb.rows()));
  }
  if (!uses_neighbors(estimator)) {
    throw ConfigError("k-sweep needs a neighbor-based estimator, not '" + std::string(estimator_name(estimator)) + "'");
  }
  const NeighborTable table = knn_exact(unique.emb.data, std::max<Index>(k_max, 2));
  return ksweep(unique.emb.data, table, estimator, k_list);
}

std::vector<IdReport> ksweep(const RowMatrixXd& data, const NeighborTable& table, Estimator estimator,
                             std::span<const Index> k_list) {
  if (!uses_neighbors(estimator)) {
    throw ConfigError("k-sweep needs a neighbor-based estimator, not '" + std::string(estimator_name(estimator)) + "'");
  }
  if (k_list.empty()) throw ConfigError("k list is empty");
  std::vector<IdReport> out;
  for (Index k : k_list) {
    if (k < 2 || k > table.k) throw ConfigError("k-sweep values must lie in [2, " + std::to_string(table.k) + "]");
    IdReport report;
    report.estimator = estimator;
    report.k = k;
    report.n = table.rows();
    if (estimator == Estimator::TwoNn) {
      report.global_value = twonn_global(table).dimension;
    } else {
      const LocalIdMap map = local_ids(data, table, estimator, k);
      report.global_value = aggregate_global(map);
      report.degenerate = map.size() - map.defined_count();
    }
    out.push_back(report);
  }
  return out;
}

}  // namespace manifold_id
