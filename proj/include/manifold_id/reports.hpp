#pragma once

#include <string>
#include <vector>

#include "manifold_id/estimators.hpp"
#include "manifold_id/fishers.hpp"

namespace manifold_id {

/// Shortest round-trip decimal form; NaN becomes an empty string.
std::string format_number(double v);

/// `lon,lat,id` with an empty id for undefined rows. Requires coordinates.
std::string local_map_to_csv(const LocalIdMap& map);

/// FeatureCollection of points with properties `id` (null when undefined),
/// `estimator` and `k`.
std::string local_map_to_geojson(const LocalIdMap& map);

std::string reports_to_csv(const std::vector<IdReport>& reports);

/// Aligned plain-text table for terminals.
std::string reports_to_table(const std::vector<IdReport>& reports);

/// `alpha,p_bar,n_hat`.
std::string profile_to_csv(const SeparabilityProfile& profile);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace manifold_id
