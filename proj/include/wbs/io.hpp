#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wbs/geometry.hpp"
#include "wbs/image.hpp"

namespace wbs::io {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Little-endian append/consume helpers for the binary formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void i8(std::int8_t v) { bytes_.push_back(static_cast<std::uint8_t>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  void str(const std::string& s);

  std::vector<std::uint8_t>& bytes() { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Throws Truncation when reading past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::span<const std::uint8_t> raw(std::size_t n);
  std::string str();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// PFM, single channel ("Pf"), little-endian (negative scale), rows stored
// bottom-to-top.
void write_pfm(const fs::path& path, const Grid<float>& grid);
Grid<float> read_pfm(const fs::path& path);

// Binary PGM (P5), maxval 255.
void write_pgm(const fs::path& path, const Grid<std::uint8_t>& grid);
Grid<std::uint8_t> read_pgm(const fs::path& path);
// Mask convenience: labels {0,1} stored as {0,255}.
void write_mask_pgm(const fs::path& path, const SemanticMask& mask);
SemanticMask read_mask_pgm(const fs::path& path);

// 8-bit PNG. write_png writes RGB for 3 channels and gray for 1.
void write_png(const fs::path& path, const ImageBuffer& image);
ImageBuffer read_png(const fs::path& path);

struct ColoredPoint {
  geometry::Vec3 position;
  std::uint8_t r = 255, g = 255, b = 255;
};

// ASCII PLY with vertex x,y,z float and red,green,blue uchar.
void write_ply(const fs::path& path, std::span<const ColoredPoint> points);

// Colour-mapped depth visualisation; invalid pixels are black.
ImageBuffer colorize_depth(const DepthMap& depth, double zMin, double zMax);

}  // namespace wbs::io
