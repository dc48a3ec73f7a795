#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "manifold_id/encoders.hpp"
#include "manifold_id/knn.hpp"
#include "manifold_id/sphere_sampling.hpp"
#include "manifold_id/types.hpp"

namespace manifold_id {

enum class Estimator { Mle, Mom, Tle, TwoNn, CorrInt, Ess, FisherS };

std::string_view estimator_name(Estimator e);
Estimator parse_estimator(std::string_view name);
/// Comma-separated names, or "all". Order is canonical and duplicates drop.
std::vector<Estimator> parse_estimator_list(std::string_view list);
const std::vector<Estimator>& all_estimators();

/// Estimators computed from a NeighborTable.
bool uses_neighbors(Estimator e);
/// Estimators with a per-point value.
bool has_local_values(Estimator e);

/// A neighborhood on which a local estimator is undefined (e.g. all radii
/// equal). Batch evaluation flags such rows instead of failing.
class DegenerateNeighborhood : public DegenerateDataError {
 public:
  using DegenerateDataError::DegenerateDataError;
};

/// Per-point local ID. Rows that could not be estimated hold NaN and are
/// marked undefined.
struct LocalIdMap {
  Estimator estimator = Estimator::Mle;
  Index k = 0;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> defined;
  std::optional<std::vector<GeoPoint>> coords;

  Index size() const { return values.size(); }
  Index defined_count() const;
};

/// Global ID with optional subsample statistics.
struct IdReport {
  Estimator estimator = Estimator::Mle;
  double global_value = std::numeric_limits<double>::quiet_NaN();
  double subsample_mean = std::numeric_limits<double>::quiet_NaN();
  double subsample_std = std::numeric_limits<double>::quiet_NaN();
  Index subsamples = 0;
  Index k = 0;
  Index n = 0;
  std::string scheme;
  std::uint64_t seed = 0;
  Index degenerate = 0;  // neighborhoods excluded from the aggregate
  std::string label;     // band, stage or sweep setting
  std::string note;      // e.g. why a row carries no value
};

// ---- local formulas ---------------------------------------------------------

/// Levina-Bickel: [ (1/(k-1)) sum_{j<k} ln(R_k / R_j) ]^-1.
double mle_local(std::span<const double> radii);

/// Method of moments: Rbar / (R_k - Rbar).
double mom_local(std::span<const double> radii);

/// Tight local estimation from the full neighbor configuration. `neighbors`
/// are row indices into `data` sorted by `radii`.
double tle_local(const RowMatrixXd& data, std::span<const Index> neighbors, std::span<const double> radii);

/// Relative threshold below which TLE surrogate distances are discarded.
inline constexpr double kTleEpsilon = 1e-12;

/// Expected simplex skewness with pair simplices: mean |sin| of the angle
/// between mean-centered neighbor vectors, inverted against ess_reference.
double ess_local(const RowMatrixXd& data, std::span<const Index> neighbors);

/// Mean |sin theta| of the mean-centered neighbor vectors.
double ess_statistic(const RowMatrixXd& data, std::span<const Index> neighbors);

inline constexpr int kEssMaxDimension = 200;

/// E|sin theta| for two independent uniform directions in R^d:
/// 0 for d = 1, Gamma(d/2)^2 / (Gamma((d+1)/2) Gamma((d-1)/2)) otherwise.
double ess_reference(int d);

/// Inverts ess_reference by linear interpolation between integer
/// dimensions, clipped to [1, kEssMaxDimension].
double ess_invert(double statistic);

// ---- global estimators -----------------------------------------------------

/// Harmonic mean of positive local estimates.
double mle_global(std::span<const double> locals);

struct TwoNnResult {
  double dimension = 0.0;
  std::vector<double> mu;  // R2 / R1 per row
  Index used = 0;          // rows with mu > 1
};

/// Closed-form Pareto MLE: n' / sum ln mu over rows with mu != 1.
TwoNnResult twonn_global(const NeighborTable& table);

struct CorrIntOptions {
  double lo_percentile = 0.5;
  double hi_percentile = 5.0;
  Index subsample = 2000;
  Index radii = 16;  // log-spaced grid points
  std::uint64_t seed = 0;
};

/// Grassberger-Procaccia slope of ln C(r) against ln r.
double corrint_global(const RowMatrixXd& data, const CorrIntOptions& options = {});

/// Local values for a neighbor-based estimator using the first k columns of
/// `table` (k = 0 means all).
LocalIdMap local_ids(const RowMatrixXd& data, const NeighborTable& table, Estimator estimator, Index k = 0);

/// Pools defined local values: harmonic mean for MLE, arithmetic mean
/// otherwise, in row order.
double aggregate_global(const LocalIdMap& map);

/// One report per k; the neighbor table is computed once at max(k_list).
std::vector<IdReport> ksweep(const EmbeddingMatrix& emb, Estimator estimator, std::span<const Index> k_list);

/// ksweep over a precomputed table on deduplicated data; every k must not
/// exceed table.k.
std::vector<IdReport> ksweep(const RowMatrixXd& data, const NeighborTable& table, Estimator estimator,
                             std::span<const Index> k_list);

}  // namespace manifold_id
