#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "manifold_id/encoders.hpp"

namespace manifold_id {

namespace {

constexpr std::uint8_t kMagic[4] = {0x45, 0x4D, 0x42, 0x31};  // "EMB1"

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc{} || r.ptr != field.data() + field.size()) {
    throw IoError("embedding CSV line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> save_embeddings(const EmbeddingMatrix& emb, EmbDtype dtype) {
  validate_embedding(emb);
  const std::size_t width = dtype == EmbDtype::F32 ? 4 : 8;
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(kEmbHeaderBytes + static_cast<std::size_t>(emb.rows() * emb.cols()) * width);
  out.push_back(static_cast<std::uint8_t>(dtype));
  put_u64(out, static_cast<std::uint64_t>(emb.rows()));
  put_u64(out, static_cast<std::uint64_t>(emb.cols()));
  for (Index i = 0; i < emb.rows(); ++i) {
    for (Index j = 0; j < emb.cols(); ++j) {
      if (dtype == EmbDtype::F32) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(emb.data(i, j)));
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      } else {
        const auto bits = std::bit_cast<std::uint64_t>(emb.data(i, j));
        put_u64(out, bits);
      }
    }
  }
  return out;
}

EmbeddingMatrix load_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw IoError("not an EMB1 embedding file (bad magic)");
  }
  if (bytes.size() < kEmbHeaderBytes) {
    throw IoError("EMB1 header truncated: expected " + std::to_string(kEmbHeaderBytes) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  const std::uint8_t dtype = bytes[4];
  if (dtype > 1) throw IoError("EMB1 dtype " + std::to_string(dtype) + " is not 0 (f32) or 1 (f64)");
  const std::uint64_t rows = get_u64(bytes.data() + 5);
  const std::uint64_t cols = get_u64(bytes.data() + 13);
  if (rows == 0 || cols == 0) throw IoError("EMB1 header declares an empty matrix");
  const std::uint64_t width = dtype == 0 ? 4 : 8;
  const std::uint64_t limit = (std::uint64_t{1} << 62) / width;
  if (rows > limit / cols) throw IoError("EMB1 header dimensions overflow");
  const std::uint64_t expected = kEmbHeaderBytes + rows * cols * width;
  if (bytes.size() != expected) {
    throw IoError("EMB1 payload size mismatch: header implies " + std::to_string(expected) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  EmbeddingMatrix emb{RowMatrixXd(static_cast<Index>(rows), static_cast<Index>(cols)), "emb1"};
  const std::uint8_t* p = bytes.data() + kEmbHeaderBytes;
  for (Index i = 0; i < emb.rows(); ++i) {
    for (Index j = 0; j < emb.cols(); ++j) {
      double v = 0.0;
      if (dtype == 0) {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) bits = (bits << 8) | p[b];
        v = static_cast<double>(std::bit_cast<float>(bits));
        p += 4;
      } else {
        v = std::bit_cast<double>(get_u64(p));
        p += 8;
      }
      if (!std::isfinite(v)) throw IoError("EMB1 row " + std::to_string(i) + " contains a non-finite value");
      emb.data(i, j) = v;
    }
  }
  return emb;
}

std::string save_embeddings_csv(const EmbeddingMatrix& emb, const std::vector<GeoPoint>& coords) {
  validate_embedding(emb);
  if (static_cast<Index>(coords.size()) != emb.rows()) throw ConfigError("coordinate count does not match rows");
  std::string out = "lon,lat";
  for (Index j = 0; j < emb.cols(); ++j) out += ",e" + std::to_string(j);
  out += '\n';
  char buf[64];
  for (Index i = 0; i < emb.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", coords[i].lon, coords[i].lat);
    out += buf;
    for (Index j = 0; j < emb.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", emb.data(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

LocatedEmbeddings load_embeddings_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(trim_cr(text.substr(pos, end - pos)));
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw IoError("embedding CSV is empty");

  const auto header = split_commas(lines[0]);
  if (header.size() < 3 || header[0] != "lon" || header[1] != "lat") {
    throw IoError("embedding CSV header must be lon,lat,e0,...");
  }
  const Index d = static_cast<Index>(header.size()) - 2;
  for (Index j = 0; j < d; ++j) {
    if (header[j + 2] != "e" + std::to_string(j)) throw IoError("embedding CSV header column " + std::to_string(j + 2) + " must be e" + std::to_string(j));
  }
  const auto n = static_cast<Index>(lines.size()) - 1;
  if (n < 1) throw IoError("embedding CSV has no rows");

  LocatedEmbeddings out{EmbeddingMatrix{RowMatrixXd(n, d), "csv"}, std::vector<GeoPoint>{}};
  out.coords->reserve(n);
  for (Index i = 0; i < n; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    const auto fields = split_commas(lines[i + 1]);
    if (static_cast<Index>(fields.size()) != d + 2) {
      throw IoError("embedding CSV line " + std::to_string(line_no) + ": expected " + std::to_string(d + 2) +
                    " fields, got " + std::to_string(fields.size()));
    }
    const double lon = parse_number(fields[0], line_no);
    const double lat = parse_number(fields[1], line_no);
    if (!std::isfinite(lon) || !std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
      throw IoError("embedding CSV row " + std::to_string(i) + ": invalid coordinate");
    }
    out.coords->push_back(GeoPoint::from_lonlat(lon, lat));
    for (Index j = 0; j < d; ++j) {
      const double v = parse_number(fields[j + 2], line_no);
      if (!std::isfinite(v)) throw IoError("embedding CSV row " + std::to_string(i) + " contains a non-finite value");
      out.emb.data(i, j) = v;
    }
  }
  return out;
}

LocatedEmbeddings read_embeddings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 4 && std::equal(kMagic, kMagic + 4, bytes.begin())) {
    LocatedEmbeddings out{load_embeddings(bytes), std::nullopt};
    out.emb.provenance = "file:" + path;
    return out;
  }
  LocatedEmbeddings out =
      load_embeddings_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  out.emb.provenance = "file:" + path;
  return out;
}

void write_embeddings_file(const std::string& path, const EmbeddingMatrix& emb, EmbDtype dtype) {
  const auto bytes = save_embeddings(emb, dtype);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing embedding file '" + path + "'");
}

}  // namespace manifold_id
