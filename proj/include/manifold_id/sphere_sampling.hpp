#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "manifold_id/types.hpp"

namespace manifold_id {

/// A location on the unit sphere. `unit3` is always derived from (lon, lat).
struct GeoPoint {
  double lon = 0.0;  // degrees, [-180, 180)
  double lat = 0.0;  // degrees, [-90, 90]
  Eigen::Vector3d unit3 = Eigen::Vector3d::UnitX();

  static GeoPoint from_lonlat(double lon_deg, double lat_deg);
  static GeoPoint from_unit3(const Eigen::Vector3d& v);
};

enum class Scheme { Fibonacci, Sphere, Land, Grid, Naive, Stratified };

std::string_view scheme_name(Scheme s);
Scheme parse_scheme(std::string_view name);

struct GeoPointSet {
  std::vector<GeoPoint> points;
  Scheme scheme = Scheme::Sphere;
  std::uint64_t seed = 0;
  // Set when the requested scheme could not be honored (stratified with
  // fewer points than strata falls back to uniform sampling).
  bool fallback_warning = false;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Wraps a longitude in degrees into [-180, 180).
double wrap_longitude(double lon_deg);

/// Bitmask over a lon/lat raster. Row 0 is the northernmost band and
/// column 0 starts at lon -180; cells are 360/width by 180/height degrees.
class LandMask {
 public:
  LandMask() = default;
  LandMask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> bytes() const { return bits_; }

  bool cell(int col, int row) const;
  void set_cell(int col, int row, bool land);
  bool lookup(double lon_deg, double lat_deg) const;
  bool any() const;

  static std::size_t payload_bytes(int width, int height);

 private:
  friend LandMask load_mask(std::span<const std::uint8_t> bytes);
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// MSK1 serialization: "MSK1", u16 width, u16 height (little-endian), then
/// ceil(width*height/8) bytes of row-major bits, MSB first within a byte.
std::vector<std::uint8_t> save_mask(const LandMask& mask);
LandMask load_mask(std::span<const std::uint8_t> bytes);
LandMask read_mask_file(const std::string& path);
void write_mask_file(const std::string& path, const LandMask& mask);

GeoPointSet sample_fibonacci(std::size_t n);
GeoPointSet sample_uniform_sphere(std::size_t n, std::uint64_t seed);
GeoPointSet sample_naive(std::size_t n, std::uint64_t seed);
GeoPointSet sample_grid(std::size_t width, std::size_t height);
GeoPointSet sample_stratified(std::size_t n, std::uint64_t seed);
GeoPointSet sample_land(std::size_t n, std::uint64_t seed, const LandMask& mask);

/// Number of equal-area latitude strata used by the stratified scheme.
inline constexpr int kStratifiedBands = 18;

/// Rejections tolerated by sample_land before giving up.
inline constexpr std::uint64_t kMaxLandRejections = 10'000'000;

/// Dispatches on scheme. Grid derives a 2:1 raster with about n cells;
/// Land requires a mask.
GeoPointSet sample_points(Scheme scheme, std::size_t n, std::uint64_t seed,
                          const LandMask* mask = nullptr);

/// Points as CSV with header `lon,lat`.
std::string points_to_csv(const GeoPointSet& set);
GeoPointSet points_from_csv(std::string_view text);

}  // namespace manifold_id
