#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "manifold_id/sphere_sampling.hpp"

namespace manifold_id {

namespace {
constexpr std::uint8_t kMagic[4] = {0x4D, 0x53, 0x4B, 0x31};  // "MSK1"
constexpr std::size_t kHeaderBytes = 8;
}  // namespace

std::size_t LandMask::payload_bytes(int width, int height) {
  return (static_cast<std::size_t>(width) * static_cast<std::size_t>(height) + 7) / 8;
}

LandMask::LandMask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0 || width > 0xFFFF || height > 0xFFFF) {
    throw ConfigError("mask dimensions must be in [1, 65535]");
  }
  bits_.assign(payload_bytes(width, height), fill ? 0xFF : 0x00);
  if (fill) {
    // Keep padding bits past width*height clear so serialization is canonical.
    const std::size_t total = static_cast<std::size_t>(width) * height;
    for (std::size_t b = total; b < bits_.size() * 8; ++b) bits_[b / 8] &= static_cast<std::uint8_t>(~(0x80u >> (b % 8)));
  }
}

bool LandMask::cell(int col, int row) const {
  const std::size_t b = static_cast<std::size_t>(row) * width_ + col;
  return (bits_[b / 8] >> (7 - b % 8)) & 1u;
}

void LandMask::set_cell(int col, int row, bool land) {
  if (col < 0 || row < 0 || col >= width_ || row >= height_) throw ConfigError("mask cell out of range");
  const std::size_t b = static_cast<std::size_t>(row) * width_ + col;
  const auto bit = static_cast<std::uint8_t>(0x80u >> (b % 8));
  if (land) {
    bits_[b / 8] |= bit;
  } else {
    bits_[b / 8] &= static_cast<std::uint8_t>(~bit);
  }
}

bool LandMask::lookup(double lon, double lat) const {
  const double u = (wrap_longitude(lon) + 180.0) / 360.0;
  const double v = (90.0 - std::clamp(lat, -90.0, 90.0)) / 180.0;
  const int col = std::clamp(static_cast<int>(std::floor(u * width_)), 0, width_ - 1);
  const int row = std::clamp(static_cast<int>(std::floor(v * height_)), 0, height_ - 1);
  return cell(col, row);
}

bool LandMask::any() const {
  return std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

std::vector<std::uint8_t> save_mask(const LandMask& mask) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  const auto w = static_cast<std::uint16_t>(mask.width());
  const auto h = static_cast<std::uint16_t>(mask.height());
  out.push_back(static_cast<std::uint8_t>(w & 0xFF));
  out.push_back(static_cast<std::uint8_t>(w >> 8));
  out.push_back(static_cast<std::uint8_t>(h & 0xFF));
  out.push_back(static_cast<std::uint8_t>(h >> 8));
  out.insert(out.end(), mask.bytes().begin(), mask.bytes().end());
  return out;
}

LandMask load_mask(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw IoError("not an MSK1 mask (bad magic)");
  }
  const int w = bytes[4] | (bytes[5] << 8);
  const int h = bytes[6] | (bytes[7] << 8);
  if (w == 0 || h == 0) throw IoError("MSK1 mask has zero width or height");
  const std::size_t expected = kHeaderBytes + LandMask::payload_bytes(w, h);
  if (bytes.size() != expected) {
    throw IoError("MSK1 payload size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  LandMask mask(w, h);
  std::copy(bytes.begin() + kHeaderBytes, bytes.end(), mask.bits_.begin());
  return mask;
}

LandMask read_mask_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_mask(bytes);
}

void write_mask_file(const std::string& path, const LandMask& mask) {
  const auto bytes = save_mask(mask);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mask file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing mask file '" + path + "'");
}

}  // namespace manifold_id
