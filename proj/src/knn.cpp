#include "manifold_id/knn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <unordered_map>

#include "manifold_id/parallel.hpp"
#include "manifold_id/rng.hpp"

namespace manifold_id {

namespace {

// Up to this ambient dimension distances are evaluated exactly for every
// pair. Above it a float Gram product screens candidates first.
constexpr Index kDirectMaxDim = 16;
constexpr Index kRowBlock = 128;
constexpr Index kColTile = 2048;

struct Candidate {
  double d2;
  Index j;
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.j < b.j);
  }
};

// Max-heap holding the k smallest candidates seen so far.
class TopK {
 public:
  explicit TopK(Index k) : k_(k) { heap_.reserve(static_cast<std::size_t>(k)); }

  void clear() { heap_.clear(); }

  double bound() const {
    return static_cast<Index>(heap_.size()) < k_ ? std::numeric_limits<double>::infinity() : heap_.front().d2;
  }

  void offer(double d2, Index j) {
    const Candidate c{d2, j};
    if (static_cast<Index>(heap_.size()) < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (c < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  std::vector<Candidate>& sorted() {
    std::sort_heap(heap_.begin(), heap_.end());
    return heap_;
  }

 private:
  Index k_;
  std::vector<Candidate> heap_;
};

[[noreturn]] void zero_radius(Index i, Index j) {
  throw DegenerateDataError("rows " + std::to_string(i) + " and " + std::to_string(j) +
                            " coincide (zero radius); deduplicate the embedding first");
}

void store_row(NeighborTable& table, Index i, const std::vector<Candidate>& best) {
  for (Index c = 0; c < table.k; ++c) {
    table.idx(i, c) = best[c].j;
    table.radii(i, c) = std::sqrt(best[c].d2);
  }
}

void knn_direct(const RowMatrixXd& data, NeighborTable& table) {
  const Index n = data.rows();
  const Index d = data.cols();
  const Index k = table.k;
  // Dimension-major copy so the per-tile loop runs over contiguous points.
  const Eigen::MatrixXd cols = data;

  parallel_chunks(n, kRowBlock, [&](Index, Index begin, Index end) {
    TopK top(k);
    std::vector<double> acc(static_cast<std::size_t>(kColTile));
    for (Index i = begin; i < end; ++i) {
      top.clear();
      const double* xi = data.row(i).data();
      for (Index j0 = 0; j0 < n; j0 += kColTile) {
        const Index len = std::min(kColTile, n - j0);
        std::fill_n(acc.begin(), len, 0.0);
        for (Index c = 0; c < d; ++c) {
          const double* col = cols.col(c).data() + j0;
          const double v = xi[c];
          for (Index t = 0; t < len; ++t) {
            const double diff = v - col[t];
            acc[t] += diff * diff;
          }
        }
        for (Index t = 0; t < len; ++t) {
          const Index j = j0 + t;
          if (j == i) continue;
          if (acc[t] == 0.0) zero_radius(i, j);
          if (acc[t] <= top.bound()) top.offer(acc[t], j);
        }
      }
      store_row(table, i, top.sorted());
    }
  });
}

// Screening state of one query row: the k smallest upper bounds seen and
// every candidate whose lower bound did not exceed the running k-th upper
// bound. The true k nearest always survive, whatever the visiting order.
struct ScreenRow {
  explicit ScreenRow(Index k) : upper(k) {}
  TopK upper;
  std::vector<Candidate> cand;
};

void knn_screened(const RowMatrixXd& data, NeighborTable& table) {
  const Index n = data.rows();
  const Index d = data.cols();
  const Index k = table.k;
  const RowMatrixXf dataf = data.cast<float>();

  Eigen::VectorXd norm2(n);
  Eigen::VectorXd norm(n);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
  for (Index i = 0; i < n; ++i) {
    norm2(i) = exact_squared_distance(data.row(i).data(), origin.data(), d);
    norm(i) = std::sqrt(norm2(i));
  }
  // |float Gram - exact dot| <= (d + 2) u_f |a||b| with u_f = 2^-24; the
  // margin below doubles that and adds the double-precision rounding of the
  // norms and of the exact recomputation.
  const double gram_err = 2.0 * static_cast<double>(d + 4) * 0x1.0p-23;
  const double dbl_err = static_cast<double>(d + 4) * 0x1.0p-52;
  const std::size_t prune_at = static_cast<std::size_t>(4 * k + 32);

  std::vector<ScreenRow> state(static_cast<std::size_t>(n), ScreenRow(k));
  std::vector<std::mutex> locks(static_cast<std::size_t>(chunk_count(n, kRowBlock)));

  // Returns the row's bound after considering candidate j.
  auto visit = [&](ScreenRow& row, Index j, double lower, double upper) {
    row.upper.offer(upper, j);
    const double bound = row.upper.bound();
    if (lower <= bound) row.cand.push_back({lower, j});
    if (row.cand.size() > prune_at) {
      std::erase_if(row.cand, [bound](const Candidate& c) { return c.d2 > bound; });
    }
    return bound;
  };

  // Each chunk owns the block pairs (I, J >= I) and updates both sides.
  parallel_chunks(n, kRowBlock, [&](Index block, Index begin, Index end) {
    const Index rows = end - begin;
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> gram(rows, kColTile);
    std::vector<double> col_bound(static_cast<std::size_t>(kColTile));
    for (Index j0 = begin; j0 < n; j0 += kColTile) {
      const Index len = std::min(kColTile, n - j0);
      gram.leftCols(len).noalias() = dataf.middleRows(begin, rows) * dataf.middleRows(j0, len).transpose();
      const Index first_block = j0 / kRowBlock;
      const Index last_block = (j0 + len - 1) / kRowBlock;
      // Lock every block touched by this tile in ascending order.
      std::vector<std::unique_lock<std::mutex>> held;
      if (block < first_block) held.emplace_back(locks[block]);
      for (Index b = first_block; b <= last_block; ++b) held.emplace_back(locks[b]);

      for (Index t = 0; t < len; ++t) col_bound[t] = state[j0 + t].upper.bound();
      for (Index r = 0; r < rows; ++r) {
        const Index i = begin + r;
        ScreenRow& own = state[i];
        double bound = own.upper.bound();
        const double n2i = norm2(i);
        const double ni = norm(i);
        const float* g = gram.row(r).data();
        for (Index t = std::max<Index>(0, i + 1 - j0); t < len; ++t) {
          const Index j = j0 + t;
          const double approx = n2i + norm2(j) - 2.0 * static_cast<double>(g[t]);
          const double slack = gram_err * ni * norm(j) + dbl_err * (n2i + norm2(j));
          const double lower = approx - slack;
          if (lower <= bound) bound = visit(own, j, lower, approx + slack);
          if (lower <= col_bound[t]) col_bound[t] = visit(state[j], i, lower, approx + slack);
        }
      }
    }
  });

  parallel_chunks(n, kRowBlock, [&](Index, Index begin, Index end) {
    std::vector<Candidate> exact;
    for (Index i = begin; i < end; ++i) {
      ScreenRow& row = state[i];
      const double bound = row.upper.bound();
      exact.clear();
      for (const Candidate& c : row.cand) {
        if (c.d2 > bound) continue;
        const double e = exact_squared_distance(data.row(i).data(), data.row(c.j).data(), d);
        if (e == 0.0) zero_radius(i, c.j);
        exact.push_back({e, c.j});
      }
      std::partial_sort(exact.begin(), exact.begin() + k, exact.end());
      store_row(table, i, exact);
      row.cand = {};
    }
  });
}

}  // namespace

NeighborTable NeighborTable::prefix(Index k_prefix) const {
  if (k_prefix < 1 || k_prefix > k) throw ConfigError("neighbor prefix must be in [1, k]");
  NeighborTable out;
  out.k = k_prefix;
  out.idx = idx.leftCols(k_prefix);
  out.radii = radii.leftCols(k_prefix);
  out.excluded_self = excluded_self;
  return out;
}

double exact_squared_distance(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index c = 0; c < d; ++c) {
    const double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

DedupResult dedup_rows(const EmbeddingMatrix& emb) {
  const Index n = emb.rows();
  const Index d = emb.cols();
  auto row_hash = [&](Index i) {
    std::uint64_t h = 0x12345678ULL;
    for (Index c = 0; c < d; ++c) {
      double v = emb.data(i, c);
      if (v == 0.0) v = 0.0;  // -0.0 and 0.0 compare equal
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      h = splitmix64(h ^ bits);
    }
    return h;
  };

  std::unordered_multimap<std::uint64_t, Index> seen;
  seen.reserve(static_cast<std::size_t>(n) * 2);
  std::vector<Index> kept;
  kept.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::uint64_t h = row_hash(i);
    bool duplicate = false;
    auto [lo, hi] = seen.equal_range(h);
    for (auto it = lo; it != hi && !duplicate; ++it) {
      duplicate = (emb.data.row(it->second).array() == emb.data.row(i).array()).all();
    }
    if (duplicate) continue;
    seen.emplace(h, i);
    kept.push_back(i);
  }

  DedupResult out;
  out.kept = std::move(kept);
  if (static_cast<Index>(out.kept.size()) == n) {
    out.emb = emb;
    return out;
  }
  out.emb.provenance = emb.provenance;
  out.emb.data.resize(static_cast<Index>(out.kept.size()), d);
  for (Index r = 0; r < static_cast<Index>(out.kept.size()); ++r) out.emb.data.row(r) = emb.data.row(out.kept[r]);
  return out;
}

NeighborTable knn_exact(const RowMatrixXd& data, Index k) {
  const Index n = data.rows();
  if (k < 1) throw ConfigError("k must be >= 1");
  if (k >= n) {
    throw ConfigError("k = " + std::to_string(k) + " requires more than k points; got n = " + std::to_string(n));
  }
  NeighborTable table;
  table.k = k;
  table.idx.resize(n, k);
  table.radii.resize(n, k);
  if (data.cols() <= kDirectMaxDim) {
    knn_direct(data, table);
  } else {
    knn_screened(data, table);
  }
  return table;
}

RowMatrixXd neighbor_directions(const RowMatrixXd& data, const NeighborTable& table, Index row) {
  if (row < 0 || row >= table.rows()) throw ConfigError("row out of range");
  RowMatrixXd out(table.k, data.cols());
  for (Index c = 0; c < table.k; ++c) {
    out.row(c) = data.row(table.idx(row, c)) - data.row(row);
    const double norm = out.row(c).norm();
    if (norm == 0.0) zero_radius(row, table.idx(row, c));
    out.row(c) /= norm;
  }
  return out;
}

}  // namespace manifold_id
