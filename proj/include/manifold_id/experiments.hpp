#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "manifold_id/encoders.hpp"
#include "manifold_id/estimators.hpp"
#include "manifold_id/fishers.hpp"
#include "manifold_id/sphere_sampling.hpp"

namespace manifold_id {

struct RunConfig {
  std::string command;
  Scheme scheme = Scheme::Sphere;
  Index n = 100000;
  Index k = 0;  // 0: 20 for global tables, 100 for local maps
  std::vector<Estimator> estimators;  // empty: command default
  EncoderSpec encoder;
  std::optional<std::string> embeddings_path;
  std::optional<std::string> mask_path;
  std::uint64_t seed = 0;
  Index subsamples = 3;
  Index subsample_size = 50000;
  std::vector<double> alpha_grid;  // empty: default grid
  double fishers_C = 10.0;
  std::string out_dir;             // empty: no files written
  std::vector<Index> k_list;       // ksweep; empty: 5,10,20,50,100,200
  Index validate_seeds = 3;
  std::string sweep_param;         // resolution sweep: L, sigma-max, M or S
  std::vector<double> sweep_values;
  bool verbose = false;  // progress on stderr

  /// Checks invariants that do not need the data (files exist, k, sizes).
  void validate() const;
  Index global_k() const { return k > 0 ? k : 20; }
  Index local_k() const { return k > 0 ? k : 100; }
};

/// Embedding plus the coordinates of each row, when known.
struct Dataset {
  EmbeddingMatrix emb;
  std::optional<std::vector<GeoPoint>> coords;
  std::string scheme;
  bool fallback_warning = false;
};

/// Samples and encodes, or reads config.embeddings_path. Duplicate rows are
/// removed (first occurrence kept) with coordinates kept aligned.
Dataset prepare_dataset(const RunConfig& config);

/// Global ID of one estimator on deduplicated data. `table` is reused by
/// neighbor-based estimators when supplied with at least k columns.
/// The FisherS separability profile is stored in `profile` when given.
IdReport estimate_global(const RowMatrixXd& data, Estimator estimator, Index k, const RunConfig& config,
                         const NeighborTable* table = nullptr, SeparabilityProfile* profile = nullptr);

/// All requested estimators, sharing one neighbor table.
std::vector<IdReport> estimate_globals(const RowMatrixXd& data, const std::vector<Estimator>& estimators, Index k,
                                       const RunConfig& config, SeparabilityProfile* profile = nullptr);

/// Rows of `n` used by each of `runs` subsamples of `size`: consecutive
/// blocks of one seeded permutation when they fit disjointly, otherwise
/// independent seeded draws without replacement. Each list is ascending.
std::vector<std::vector<Index>> subsample_rows(Index n, Index runs, Index size, std::uint64_t seed);

struct GlobalIdResult {
  std::vector<IdReport> reports;
  std::optional<SeparabilityProfile> fishers_profile;
};

GlobalIdResult cmd_global_id(const RunConfig& config);
std::vector<LocalIdMap> cmd_local_id(const RunConfig& config);

inline constexpr int kLatitudeBands = 10;

/// Band b covers latitudes [-90 + 18b, -72 + 18b); the top band includes 90.
int latitude_band(double lat);

std::vector<IdReport> cmd_bands(const RunConfig& config);
std::vector<IdReport> cmd_ksweep(const RunConfig& config);

struct ValidationRow {
  std::string stage;
  Estimator estimator = Estimator::Mle;
  std::vector<double> values;  // one per seed
  double mean = 0.0;
  double std = 0.0;
};

struct ValidationResult {
  std::vector<ValidationRow> rows;
  std::vector<std::pair<Estimator, double>> mae;  // mean |stage mean - 2| over stages
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

/// The four stages raw, SH(L=40), SH+linear and SH+SIREN on uniform sphere
/// samples, scored with MLE, MOM, TLE and FisherS against the true ID 2.
ValidationResult cmd_validate(const RunConfig& config);

std::vector<IdReport> cmd_resolution_sweep(const RunConfig& config);

std::string validation_to_csv(const ValidationResult& result);
std::string validation_to_table(const ValidationResult& result);

}  // namespace manifold_id
