#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "manifold_id/estimators.hpp"
#include "manifold_id/types.hpp"

namespace manifold_id {

/// Margins 0.02, 0.04, ..., 0.98.
std::vector<double> default_alpha_grid();

/// "lo:hi:step" (inclusive range) or a comma-separated list. Values must lie
/// in (0, 1) and be strictly ascending.
std::vector<double> parse_alpha_grid(std::string_view text);

struct Standardized {
  RowMatrixXd x;              // unit-norm rows
  Index retained_dims = 0;
  Eigen::VectorXd eigenvalues;  // covariance spectrum, descending
};

/// Centers, keeps principal components with eigenvalue >= lambda_max / C,
/// whitens them and projects every row onto the unit sphere.
Standardized standardize(const RowMatrixXd& data, double C = 10.0);

struct SeparabilityProfile {
  std::vector<double> alphas;
  std::vector<double> p_bar;
  std::vector<double> n_hat;  // NaN where p_bar = 0
  std::optional<RowMatrixXd> p_point;  // n x |alphas|
  Index retained_dims = 0;
  Index n = 0;
  double alpha_star = 0.0;
  Index alpha_star_index = -1;
};

/// p_i(alpha) = #{j != i : <x_i, x_j> > alpha} / n and its mean over i.
/// Counts are exact: float Gram screening, with every pair whose product
/// lies near a grid margin recomputed in double precision.
SeparabilityProfile separability_profile(const RowMatrixXd& x_unit, std::span<const double> alphas,
                                         bool per_point = false);

/// Principal branch of Lambert W for x >= -1/e.
double lambert_w0(double x);

/// Mean inseparability of n-dimensional spherical data at margin alpha:
/// (1 - alpha^2)^((n-1)/2) / (alpha sqrt(2 pi n)).
double p_bar_sphere(double alpha, double n);

/// Solves p_bar_sphere(alpha, n) = p_bar for n.
double invert_dimension(double p_bar, double alpha);

/// Fills n_hat and selects alpha* as the grid margin nearest
/// 0.9 * max{alpha : p_bar(alpha) > 0}.
void finalize_profile(SeparabilityProfile& profile);

struct FisherSResult {
  double dimension = 0.0;
  SeparabilityProfile profile;
};

FisherSResult fishers_global(const RowMatrixXd& data, double C = 10.0,
                             std::span<const double> alphas = {});

/// Pointwise n_i from p_i(alpha); alpha defaults to the global alpha*. Rows
/// with p_i = 0 are left undefined.
LocalIdMap fishers_local(const RowMatrixXd& data, double C = 10.0, std::span<const double> alphas = {},
                         std::optional<double> alpha = std::nullopt);

}  // namespace manifold_id
