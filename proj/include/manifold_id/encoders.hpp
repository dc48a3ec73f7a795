#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "manifold_id/sphere_sampling.hpp"
#include "manifold_id/types.hpp"

namespace manifold_id {

/// N x D embedding, one row per location, with a free-form provenance tag.
struct EmbeddingMatrix {
  RowMatrixXd data;
  std::string provenance;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
};

/// Throws DegenerateDataError naming the first row with a non-finite value,
/// or ConfigError when the matrix is empty.
void validate_embedding(const EmbeddingMatrix& emb);

enum class EncoderKind { Raw, SphericalHarmonics, RffHierarchical, SinusoidalMultiscale };
enum class HeadKind { None, Linear, Siren };

std::string_view encoder_name(EncoderKind kind);
EncoderKind parse_encoder(std::string_view name);
std::string_view head_name(HeadKind kind);
HeadKind parse_head(std::string_view name);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::Raw;
  int L = 10;                    // spherical harmonics degree bound
  double sigma_min = 1.0;        // RFF frequency range
  double sigma_max = 256.0;
  int M = 3;                     // RFF hierarchy levels
  int features_per_level = 64;   // RFF features per level (sin and cos each)
  int S = 16;                    // multiscale components
  double lambda_min = 1.0;       // multiscale wavelengths, degrees
  double lambda_max = 360.0;
  HeadKind head = HeadKind::None;
  int head_width = 256;
  int head_depth = 2;
  double omega0 = 30.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
};

/// Largest supported SH degree; the normalized recurrence is exact well past
/// this but the guard keeps D = (L+1)^2 bounded.
inline constexpr int kMaxShDegree = 200;

inline Index sh_column(int l, int m) { return static_cast<Index>(l) * l + l + m; }

EmbeddingMatrix encode_raw(const GeoPointSet& points);

/// Real, orthonormal spherical harmonics without the Condon-Shortley phase,
/// columns ordered (l, m) with m from -l to l.
EmbeddingMatrix encode_spherical_harmonics(const GeoPointSet& points, int L);

/// Writes the (L+1)^2 real SH values of one point into `out`.
void real_spherical_harmonics(double lon_deg, const Eigen::Vector3d& unit3, int L, std::span<double> out);

/// Hierarchical random Fourier features of the unit 3-vector. Level m uses
/// scale gamma_m log-spaced in [sigma_min, sigma_max]; columns per level are
/// F sines then F cosines.
EmbeddingMatrix encode_rff(const GeoPointSet& points, double sigma_min, double sigma_max, int M,
                           int features_per_level, std::uint64_t seed);

/// sin/cos of lon and lat (degrees) at S wavelengths log-spaced between
/// lambda_min and lambda_max. Columns: for c in (lon, lat), for s: sin, cos.
EmbeddingMatrix encode_sinusoidal_multiscale(const GeoPointSet& points, int S, double lambda_min,
                                             double lambda_max);

/// Randomly initialized head: `depth` dense layers of `width` units.
/// Linear: y = Wx + b. Siren: y = sin(omega0 (Wx + b)).
EmbeddingMatrix apply_head(const EmbeddingMatrix& emb, HeadKind head, int width, int depth, double omega0,
                           std::uint64_t seed);

/// One dense layer with caller-supplied weights (W is out x in).
EmbeddingMatrix apply_linear_layer(const EmbeddingMatrix& emb, const Eigen::MatrixXd& W,
                                   const Eigen::VectorXd& b);

/// Positional encoding followed by the optional head.
EmbeddingMatrix encode(const GeoPointSet& points, const EncoderSpec& spec);

// ---- serialization ---------------------------------------------------------

enum class EmbDtype : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::size_t kEmbHeaderBytes = 21;

/// EMB1: "EMB1", u8 dtype, u64 rows, u64 cols (little-endian), row-major payload.
std::vector<std::uint8_t> save_embeddings(const EmbeddingMatrix& emb, EmbDtype dtype = EmbDtype::F64);
EmbeddingMatrix load_embeddings(std::span<const std::uint8_t> bytes);

/// Embeddings that may carry the coordinates they were computed at.
struct LocatedEmbeddings {
  EmbeddingMatrix emb;
  std::optional<std::vector<GeoPoint>> coords;
};

/// CSV with header `lon,lat,e0,...,e{D-1}`.
std::string save_embeddings_csv(const EmbeddingMatrix& emb, const std::vector<GeoPoint>& coords);
LocatedEmbeddings load_embeddings_csv(std::string_view text);

/// Reads EMB1 or CSV, chosen by the leading magic bytes.
LocatedEmbeddings read_embeddings_file(const std::string& path);
void write_embeddings_file(const std::string& path, const EmbeddingMatrix& emb, EmbDtype dtype = EmbDtype::F64);

}  // namespace manifold_id
