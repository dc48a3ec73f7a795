#pragma once

#include <vector>

#include "manifold_id/encoders.hpp"
#include "manifold_id/types.hpp"

namespace manifold_id {

/// Exact k-nearest-neighbor table. Row i lists the k nearest other rows in
/// ascending (distance, index) order together with their Euclidean radii.
struct NeighborTable {
  Index k = 0;
  IndexMatrix idx;
  RowMatrixXd radii;
  bool excluded_self = true;

  Index rows() const { return idx.rows(); }

  /// The first k' <= k columns; exact because rows are sorted.
  NeighborTable prefix(Index k_prefix) const;
};

struct DedupResult {
  EmbeddingMatrix emb;
  std::vector<Index> kept;  // original row of each kept row, ascending
};

/// Drops rows equal to an earlier row, keeping first occurrences.
DedupResult dedup_rows(const EmbeddingMatrix& emb);

/// Squared Euclidean distance accumulated left to right in double precision.
/// Every distance reported by this module is computed by this function.
double exact_squared_distance(const double* a, const double* b, Index d);

/// Exact Euclidean kNN excluding self, ties broken by lower index.
/// Requires 1 <= k < n and pairwise distinct rows; a zero radius raises
/// DegenerateDataError.
NeighborTable knn_exact(const RowMatrixXd& data, Index k);

/// Unit vectors from row `row` to each of its neighbors, one per row.
RowMatrixXd neighbor_directions(const RowMatrixXd& data, const NeighborTable& table, Index row);

}  // namespace manifold_id
