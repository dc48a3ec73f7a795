#include "manifold_id/sphere_sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <unordered_set>

#include "manifold_id/rng.hpp"

namespace manifold_id {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;

struct LonLatHash {
  std::size_t operator()(const std::pair<double, double>& p) const {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::memcpy(&a, &p.first, sizeof a);
    std::memcpy(&b, &p.second, sizeof b);
    return static_cast<std::size_t>(splitmix64(a ^ splitmix64(b)));
  }
};

// Collects n points with pairwise distinct (lon, lat). Draws are requested
// by index; an exact repeat is dropped and the next index is drawn.
template <typename Draw>
std::vector<GeoPoint> draw_unique(std::size_t n, Draw&& draw) {
  std::vector<GeoPoint> out;
  out.reserve(n);
  std::unordered_set<std::pair<double, double>, LonLatHash> seen;
  seen.reserve(n * 2);
  for (std::uint64_t i = 0; out.size() < n; ++i) {
    GeoPoint p = draw(i);
    if (seen.emplace(p.lon, p.lat).second) out.push_back(p);
  }
  return out;
}

void require_points(std::size_t n) {
  if (n == 0) throw ConfigError("point count must be at least 1");
}

GeoPoint uniform_sphere_point(const CounterRng& rng, std::uint64_t i) {
  const double lon = -180.0 + 360.0 * rng.uniform(i, 0);
  const double z = 2.0 * rng.uniform(i, 1) - 1.0;
  return GeoPoint::from_lonlat(lon, std::asin(z) * kDeg);
}

}  // namespace

double wrap_longitude(double lon) {
  double y = std::fmod(lon + 180.0, 360.0);
  if (y < 0.0) y += 360.0;
  if (y >= 360.0) y -= 360.0;
  double out = y - 180.0;
  if (out >= 180.0) out = -180.0;
  return out;
}

GeoPoint GeoPoint::from_lonlat(double lon_deg, double lat_deg) {
  GeoPoint p;
  p.lon = wrap_longitude(lon_deg);
  p.lat = std::clamp(lat_deg, -90.0, 90.0);
  const double lam = p.lon * kRad;
  const double phi = p.lat * kRad;
  const double c = std::cos(phi);
  p.unit3 = Eigen::Vector3d(c * std::cos(lam), c * std::sin(lam), std::sin(phi));
  if (p.lat == 90.0 || p.lat == -90.0) p.unit3 = Eigen::Vector3d(0.0, 0.0, p.lat > 0 ? 1.0 : -1.0);
  return p;
}

GeoPoint GeoPoint::from_unit3(const Eigen::Vector3d& v) {
  const Eigen::Vector3d u = v.normalized();
  const double lat = std::atan2(u.z(), std::hypot(u.x(), u.y())) * kDeg;
  const double lon = std::atan2(u.y(), u.x()) * kDeg;
  return from_lonlat(lon, lat);
}

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Fibonacci: return "fibonacci";
    case Scheme::Sphere: return "sphere";
    case Scheme::Land: return "land";
    case Scheme::Grid: return "grid";
    case Scheme::Naive: return "naive";
    case Scheme::Stratified: return "stratified";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::Fibonacci, Scheme::Sphere, Scheme::Land, Scheme::Grid, Scheme::Naive,
                   Scheme::Stratified}) {
    if (scheme_name(s) == name) return s;
  }
  throw ConfigError("unknown sampling scheme '" + std::string(name) + "'");
}

GeoPointSet sample_fibonacci(std::size_t n) {
  require_points(n);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  GeoPointSet set{.points = {}, .scheme = Scheme::Fibonacci, .seed = 0};
  set.points = draw_unique(n, [&](std::uint64_t i) {
    // Indices past n-1 are never needed: the lattice has distinct latitudes.
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double theta = std::fmod(static_cast<double>(i) * golden_angle, 2.0 * std::numbers::pi);
    return GeoPoint::from_lonlat(theta * kDeg, std::asin(z) * kDeg);
  });
  return set;
}

GeoPointSet sample_uniform_sphere(std::size_t n, std::uint64_t seed) {
  require_points(n);
  const CounterRng rng(seed, "sample/sphere");
  GeoPointSet set{.points = {}, .scheme = Scheme::Sphere, .seed = seed};
  set.points = draw_unique(n, [&](std::uint64_t i) { return uniform_sphere_point(rng, i); });
  return set;
}

GeoPointSet sample_naive(std::size_t n, std::uint64_t seed) {
  require_points(n);
  const CounterRng rng(seed, "sample/naive");
  GeoPointSet set{.points = {}, .scheme = Scheme::Naive, .seed = seed};
  set.points = draw_unique(n, [&](std::uint64_t i) {
    return GeoPoint::from_lonlat(-180.0 + 360.0 * rng.uniform(i, 0), -90.0 + 180.0 * rng.uniform(i, 1));
  });
  return set;
}

GeoPointSet sample_grid(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ConfigError("grid width and height must be positive");
  GeoPointSet set{.points = {}, .scheme = Scheme::Grid, .seed = 0};
  set.points.reserve(width * height);
  const double dlon = 360.0 / static_cast<double>(width);
  const double dlat = 180.0 / static_cast<double>(height);
  for (std::size_t r = 0; r < height; ++r) {
    const double lat = 90.0 - (static_cast<double>(r) + 0.5) * dlat;
    for (std::size_t c = 0; c < width; ++c) {
      set.points.push_back(GeoPoint::from_lonlat(-180.0 + (static_cast<double>(c) + 0.5) * dlon, lat));
    }
  }
  return set;
}

GeoPointSet sample_stratified(std::size_t n, std::uint64_t seed) {
  require_points(n);
  if (n < static_cast<std::size_t>(kStratifiedBands)) {
    GeoPointSet set = sample_uniform_sphere(n, seed);
    set.scheme = Scheme::Stratified;
    set.fallback_warning = true;
    return set;
  }
  const CounterRng rng(seed, "sample/stratified");
  const std::size_t base = n / kStratifiedBands;
  const std::size_t extra = n % kStratifiedBands;
  // Draw index i maps to a band by the allocation order; indices >= n are
  // top-up draws after dedup and are spread over bands round-robin.
  std::vector<int> band_of(n);
  {
    std::size_t i = 0;
    for (int b = 0; b < kStratifiedBands; ++b) {
      const std::size_t count = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
      for (std::size_t j = 0; j < count; ++j) band_of[i++] = b;
    }
  }
  GeoPointSet set{.points = {}, .scheme = Scheme::Stratified, .seed = seed};
  set.points = draw_unique(n, [&](std::uint64_t i) {
    const int b = i < n ? band_of[i] : static_cast<int>(i % kStratifiedBands);
    // Equal-area bands are equal slices in z = sin(lat).
    const double z_hi = 1.0 - 2.0 * b / static_cast<double>(kStratifiedBands);
    const double z_lo = 1.0 - 2.0 * (b + 1) / static_cast<double>(kStratifiedBands);
    const double z = z_lo + (z_hi - z_lo) * rng.uniform(i, 1);
    return GeoPoint::from_lonlat(-180.0 + 360.0 * rng.uniform(i, 0), std::asin(std::clamp(z, -1.0, 1.0)) * kDeg);
  });
  return set;
}

GeoPointSet sample_land(std::size_t n, std::uint64_t seed, const LandMask& mask) {
  require_points(n);
  if (mask.width() <= 0 || mask.height() <= 0) throw ConfigError("land mask is empty");
  const CounterRng rng(seed, "sample/sphere");
  GeoPointSet set{.points = {}, .scheme = Scheme::Land, .seed = seed};
  std::uint64_t candidate = 0;
  std::uint64_t rejections = 0;
  set.points = draw_unique(n, [&](std::uint64_t) {
    for (;;) {
      const GeoPoint p = uniform_sphere_point(rng, candidate++);
      if (mask.lookup(p.lon, p.lat)) return p;
      if (++rejections >= kMaxLandRejections) {
        throw DegenerateDataError("land sampling gave up after " + std::to_string(rejections) +
                                  " rejections; the mask has no reachable land cells");
      }
    }
  });
  return set;
}

GeoPointSet sample_points(Scheme scheme, std::size_t n, std::uint64_t seed, const LandMask* mask) {
  switch (scheme) {
    case Scheme::Fibonacci: return sample_fibonacci(n);
    case Scheme::Sphere: return sample_uniform_sphere(n, seed);
    case Scheme::Naive: return sample_naive(n, seed);
    case Scheme::Stratified: return sample_stratified(n, seed);
    case Scheme::Grid: {
      require_points(n);
      const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(n / 2.0))));
      return sample_grid(2 * h, h);
    }
    case Scheme::Land:
      if (mask == nullptr) throw ConfigError("land sampling requires a mask (--mask)");
      return sample_land(n, seed, *mask);
  }
  throw ConfigError("unsupported scheme");
}

std::string points_to_csv(const GeoPointSet& set) {
  std::string out = "lon,lat\n";
  char buf[64];
  for (const auto& p : set.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.lon, p.lat);
    out += buf;
  }
  return out;
}

GeoPointSet points_from_csv(std::string_view text) {
  GeoPointSet set;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.substr(0, 7) != "lon,lat") throw IoError("points CSV must start with header 'lon,lat'");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw IoError("points CSV line " + std::to_string(line_no) + ": expected lon,lat");
    auto field2_end = line.find(',', comma + 1);
    if (field2_end == std::string_view::npos) field2_end = line.size();
    double lon = 0.0;
    double lat = 0.0;
    const auto r1 = std::from_chars(line.data(), line.data() + comma, lon);
    const auto r2 = std::from_chars(line.data() + comma + 1, line.data() + field2_end, lat);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || !std::isfinite(lon) || !std::isfinite(lat) ||
        lat < -90.0 || lat > 90.0) {
      throw IoError("points CSV line " + std::to_string(line_no) + ": invalid coordinate");
    }
    set.points.push_back(GeoPoint::from_lonlat(lon, lat));
  }
  if (header) throw IoError("points CSV is empty");
  return set;
}

}  // namespace manifold_id
