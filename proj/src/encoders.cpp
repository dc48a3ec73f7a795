#include "manifold_id/encoders.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "manifold_id/parallel.hpp"
#include "manifold_id/rng.hpp"

namespace manifold_id {

namespace {

constexpr double kRad = std::numbers::pi / 180.0;
constexpr Index kRowGrain = 1024;

void require_points(const GeoPointSet& points) {
  if (points.empty()) throw ConfigError("cannot encode an empty point set");
}

}  // namespace

void validate_embedding(const EmbeddingMatrix& emb) {
  if (emb.rows() < 1 || emb.cols() < 1) throw ConfigError("embedding matrix must have at least one row and column");
  for (Index i = 0; i < emb.rows(); ++i) {
    if (!emb.data.row(i).allFinite()) {
      throw DegenerateDataError("embedding row " + std::to_string(i) + " contains a non-finite value");
    }
  }
}

std::string_view encoder_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Raw: return "raw";
    case EncoderKind::SphericalHarmonics: return "sh";
    case EncoderKind::RffHierarchical: return "rff";
    case EncoderKind::SinusoidalMultiscale: return "multiscale";
  }
  return "unknown";
}

EncoderKind parse_encoder(std::string_view name) {
  if (name == "raw") return EncoderKind::Raw;
  if (name == "sh" || name == "spherical_harmonics") return EncoderKind::SphericalHarmonics;
  if (name == "rff" || name == "rff_hierarchical") return EncoderKind::RffHierarchical;
  if (name == "multiscale" || name == "sinusoidal_multiscale" || name == "grid") return EncoderKind::SinusoidalMultiscale;
  throw ConfigError("unknown encoder '" + std::string(name) + "'");
}

std::string_view head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::None: return "none";
    case HeadKind::Linear: return "linear";
    case HeadKind::Siren: return "siren";
  }
  return "unknown";
}

HeadKind parse_head(std::string_view name) {
  if (name == "none") return HeadKind::None;
  if (name == "linear") return HeadKind::Linear;
  if (name == "siren") return HeadKind::Siren;
  throw ConfigError("unknown head '" + std::string(name) + "'");
}

void EncoderSpec::validate() const {
  if (L < 0) throw ConfigError("L must be >= 0");
  if (L > kMaxShDegree) throw ConfigError("L must be <= " + std::to_string(kMaxShDegree));
  if (M < 1) throw ConfigError("M must be >= 1");
  if (S < 1) throw ConfigError("S must be >= 1");
  if (features_per_level < 1) throw ConfigError("features per level must be >= 1");
  if (!(sigma_min > 0.0) || !(sigma_min <= sigma_max)) throw ConfigError("require 0 < sigma_min <= sigma_max");
  if (!(lambda_min > 0.0) || !(lambda_min <= lambda_max)) throw ConfigError("require 0 < lambda_min <= lambda_max");
  if (!(omega0 > 0.0)) throw ConfigError("omega0 must be > 0");
  if (head != HeadKind::None && (head_width < 1 || head_depth < 1)) {
    throw ConfigError("head width and depth must be >= 1");
  }
}

std::string EncoderSpec::describe() const {
  std::ostringstream os;
  os << encoder_name(kind);
  switch (kind) {
    case EncoderKind::Raw: break;
    case EncoderKind::SphericalHarmonics: os << "(L=" << L << ")"; break;
    case EncoderKind::RffHierarchical:
      os << "(sigma=" << sigma_min << ".." << sigma_max << ",M=" << M << ",F=" << features_per_level << ")";
      break;
    case EncoderKind::SinusoidalMultiscale:
      os << "(S=" << S << ",lambda=" << lambda_min << ".." << lambda_max << ")";
      break;
  }
  if (head != HeadKind::None) {
    os << "+" << head_name(head) << "(width=" << head_width << ",depth=" << head_depth;
    if (head == HeadKind::Siren) os << ",omega0=" << omega0;
    os << ")";
  }
  return os.str();
}

EmbeddingMatrix encode_raw(const GeoPointSet& points) {
  require_points(points);
  const auto n = static_cast<Index>(points.size());
  EmbeddingMatrix out{RowMatrixXd(n, 2), "raw"};
  for (Index i = 0; i < n; ++i) {
    out.data(i, 0) = points.points[i].lon;
    out.data(i, 1) = points.points[i].lat;
  }
  for (Index c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) sum += out.data(i, c);
    const double mean = sum / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) out.data(i, c) -= mean;
  }
  return out;
}

void real_spherical_harmonics(double lon_deg, const Eigen::Vector3d& unit3, int L, std::span<double> out) {
  const double x = unit3.z();                      // cos(colatitude)
  const double s = std::hypot(unit3.x(), unit3.y());  // sin(colatitude)
  const double lam = lon_deg * kRad;

  // Fully normalized associated Legendre functions: diagonal seed, then the
  // three-term recurrence up each column m.
  double pmm = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int m = 0; m <= L; ++m) {
    if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    const double cm = m == 0 ? 1.0 : std::numbers::sqrt2 * std::cos(m * lam);
    const double sm = m == 0 ? 0.0 : std::numbers::sqrt2 * std::sin(m * lam);

    double p_prev2 = 0.0;
    double p_prev = pmm;
    for (int l = m; l <= L; ++l) {
      double p = 0.0;
      if (l == m) {
        p = pmm;
      } else if (l == m + 1) {
        p = std::sqrt(2.0 * m + 3.0) * x * pmm;
      } else {
        const double ll = static_cast<double>(l) * l;
        const double mm = static_cast<double>(m) * m;
        const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
        const double lm1 = static_cast<double>(l - 1) * (l - 1);
        const double b = std::sqrt((lm1 - mm) / (4.0 * lm1 - 1.0));
        p = a * (x * p_prev - b * p_prev2);
      }
      if (l > m) {
        p_prev2 = p_prev;
        p_prev = p;
      }
      if (m == 0) {
        out[sh_column(l, 0)] = p;
      } else {
        out[sh_column(l, m)] = cm * p;
        out[sh_column(l, -m)] = sm * p;
      }
    }
  }
}

EmbeddingMatrix encode_spherical_harmonics(const GeoPointSet& points, int L) {
  require_points(points);
  if (L < 0) throw ConfigError("L must be >= 0");
  if (L > kMaxShDegree) throw ConfigError("L must be <= " + std::to_string(kMaxShDegree));
  const auto n = static_cast<Index>(points.size());
  const Index d = static_cast<Index>(L + 1) * (L + 1);
  EmbeddingMatrix out{RowMatrixXd(n, d), "sh(L=" + std::to_string(L) + ")"};
  parallel_chunks(n, kRowGrain, [&](Index, Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      const auto& p = points.points[i];
      real_spherical_harmonics(p.lon, p.unit3, L, std::span<double>(out.data.row(i).data(), d));
    }
  });
  return out;
}

EmbeddingMatrix encode_rff(const GeoPointSet& points, double sigma_min, double sigma_max, int M,
                           int features_per_level, std::uint64_t seed) {
  require_points(points);
  if (M < 1) throw ConfigError("M must be >= 1");
  if (features_per_level < 1) throw ConfigError("features per level must be >= 1");
  if (!(sigma_min > 0.0) || sigma_min > sigma_max) throw ConfigError("require 0 < sigma_min <= sigma_max");

  const auto n = static_cast<Index>(points.size());
  const Index F = features_per_level;
  const CounterRng rng(seed, "encoder/rff");

  // Frequencies and phases: rows are (level, feature), pre-scaled by gamma.
  RowMatrixXd W(M * F, 3);
  Eigen::VectorXd b(M * F);
  for (int m = 0; m < M; ++m) {
    const double t = M == 1 ? 0.0 : static_cast<double>(m) / (M - 1);
    const double gamma = sigma_min * std::pow(sigma_max / sigma_min, t);
    const CounterRng level = rng.substream("level" + std::to_string(m));
    for (Index f = 0; f < F; ++f) {
      for (int c = 0; c < 3; ++c) W(m * F + f, c) = gamma * level.normal(static_cast<std::uint64_t>(f), c);
      b(m * F + f) = 2.0 * std::numbers::pi * level.uniform(static_cast<std::uint64_t>(f), 16);
    }
  }

  std::ostringstream tag;
  tag << "rff(sigma=" << sigma_min << ".." << sigma_max << ",M=" << M << ",F=" << F << ")";
  EmbeddingMatrix out{RowMatrixXd(n, 2 * M * F), tag.str()};
  parallel_chunks(n, kRowGrain, [&](Index, Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      const Eigen::Vector3d& u = points.points[i].unit3;
      for (int m = 0; m < M; ++m) {
        for (Index f = 0; f < F; ++f) {
          const Index r = m * F + f;
          const double phase = W(r, 0) * u.x() + W(r, 1) * u.y() + W(r, 2) * u.z() + b(r);
          out.data(i, 2 * m * F + f) = std::sin(phase);
          out.data(i, 2 * m * F + F + f) = std::cos(phase);
        }
      }
    }
  });
  return out;
}

EmbeddingMatrix encode_sinusoidal_multiscale(const GeoPointSet& points, int S, double lambda_min,
                                             double lambda_max) {
  require_points(points);
  if (S < 1) throw ConfigError("S must be >= 1");
  if (!(lambda_min > 0.0) || lambda_min > lambda_max) throw ConfigError("require 0 < lambda_min <= lambda_max");
  const auto n = static_cast<Index>(points.size());
  std::vector<double> wavelength(S);
  for (int s = 0; s < S; ++s) {
    const double t = S == 1 ? 0.0 : static_cast<double>(s) / (S - 1);
    wavelength[s] = lambda_min * std::pow(lambda_max / lambda_min, t);
  }
  std::ostringstream tag;
  tag << "multiscale(S=" << S << ",lambda=" << lambda_min << ".." << lambda_max << ")";
  EmbeddingMatrix out{RowMatrixXd(n, 4 * S), tag.str()};
  parallel_chunks(n, kRowGrain, [&](Index, Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      const double coord[2] = {points.points[i].lon, points.points[i].lat};
      for (int c = 0; c < 2; ++c) {
        for (int s = 0; s < S; ++s) {
          const double arg = coord[c] / wavelength[s];
          out.data(i, 2 * (c * S + s)) = std::sin(arg);
          out.data(i, 2 * (c * S + s) + 1) = std::cos(arg);
        }
      }
    }
  });
  return out;
}

EmbeddingMatrix apply_linear_layer(const EmbeddingMatrix& emb, const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
  if (W.cols() != emb.cols() || W.rows() != b.size()) throw ConfigError("layer shape does not match input");
  EmbeddingMatrix out{RowMatrixXd(emb.rows(), W.rows()), emb.provenance + "+linear(injected)"};
  out.data.noalias() = emb.data * W.transpose();
  out.data.rowwise() += b.transpose();
  return out;
}

EmbeddingMatrix apply_head(const EmbeddingMatrix& emb, HeadKind head, int width, int depth, double omega0,
                           std::uint64_t seed) {
  if (head == HeadKind::None) return emb;
  if (width < 1) throw ConfigError("head width must be >= 1");
  if (depth < 1) throw ConfigError("head depth must be >= 1");
  if (!(omega0 > 0.0)) throw ConfigError("omega0 must be > 0");
  if (!emb.data.allFinite()) throw DegenerateDataError("head input contains non-finite values");

  const CounterRng rng(seed, head == HeadKind::Linear ? "head/linear" : "head/siren");
  RowMatrixXd x = emb.data;
  for (int layer = 0; layer < depth; ++layer) {
    const Index fan_in = x.cols();
    const double fan = static_cast<double>(fan_in);
    double w_bound = 1.0 / std::sqrt(fan);
    if (head == HeadKind::Siren) w_bound = layer == 0 ? 1.0 / fan : std::sqrt(6.0 / fan) / omega0;
    const double b_bound = 1.0 / std::sqrt(fan);

    const CounterRng lr = rng.substream("layer" + std::to_string(layer));
    Eigen::MatrixXd W(width, fan_in);
    Eigen::VectorXd b(width);
    for (Index r = 0; r < width; ++r) {
      for (Index c = 0; c < fan_in; ++c) {
        W(r, c) = lr.uniform(static_cast<std::uint64_t>(r * fan_in + c), 0, -w_bound, w_bound);
      }
      b(r) = lr.uniform(static_cast<std::uint64_t>(r), 1, -b_bound, b_bound);
    }
    RowMatrixXd y(x.rows(), width);
    y.noalias() = x * W.transpose();
    y.rowwise() += b.transpose();
    if (head == HeadKind::Siren) y = (omega0 * y.array()).sin().matrix();
    x = std::move(y);
  }
  std::ostringstream tag;
  tag << emb.provenance << "+" << head_name(head) << "(width=" << width << ",depth=" << depth;
  if (head == HeadKind::Siren) tag << ",omega0=" << omega0;
  tag << ")";
  return EmbeddingMatrix{std::move(x), tag.str()};
}

EmbeddingMatrix encode(const GeoPointSet& points, const EncoderSpec& spec) {
  spec.validate();
  EmbeddingMatrix base;
  switch (spec.kind) {
    case EncoderKind::Raw: base = encode_raw(points); break;
    case EncoderKind::SphericalHarmonics: base = encode_spherical_harmonics(points, spec.L); break;
    case EncoderKind::RffHierarchical:
      base = encode_rff(points, spec.sigma_min, spec.sigma_max, spec.M, spec.features_per_level,
                        CounterRng(spec.seed, "encoder").key());
      break;
    case EncoderKind::SinusoidalMultiscale:
      base = encode_sinusoidal_multiscale(points, spec.S, spec.lambda_min, spec.lambda_max);
      break;
  }
  if (spec.head == HeadKind::None) return base;
  return apply_head(base, spec.head, spec.head_width, spec.head_depth, spec.omega0,
                    CounterRng(spec.seed, "head").key());
}

}  // namespace manifold_id
