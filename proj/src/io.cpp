#include "wbs/io.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "wbs/error.hpp"

namespace wbs::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {
template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}
}  // namespace

void ByteWriter::u16(std::uint16_t v) { put(bytes_, v); }
void ByteWriter::u32(std::uint32_t v) { put(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { put(bytes_, v); }
void ByteWriter::f32(float v) { put(bytes_, v); }
void ByteWriter::str(const std::string& s) {
  u16(static_cast<std::uint16_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) fail(ErrorKind::Truncation, "unexpected end of data");
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

namespace {
template <typename T>
T get(ByteReader& r) {
  T v;
  std::memcpy(&v, r.raw(sizeof(T)).data(), sizeof(T));
  return v;
}
}  // namespace

std::uint8_t ByteReader::u8() { return get<std::uint8_t>(*this); }
std::uint16_t ByteReader::u16() { return get<std::uint16_t>(*this); }
std::uint32_t ByteReader::u32() { return get<std::uint32_t>(*this); }
std::uint64_t ByteReader::u64() { return get<std::uint64_t>(*this); }
float ByteReader::f32() { return get<float>(*this); }
std::string ByteReader::str() {
  const auto n = u16();
  auto s = raw(n);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Netpbm-style headers

namespace {

// Parses whitespace-separated header tokens, skipping '#' comments; leaves
// `pos` one byte past the single whitespace that ends the last token.
std::vector<std::string> header_tokens(const std::vector<std::uint8_t>& bytes, int count,
                                       std::size_t& pos) {
  std::vector<std::string> tokens;
  while (static_cast<int>(tokens.size()) < count) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    if (tok.empty()) fail(ErrorKind::Truncation, "truncated image header");
    tokens.push_back(tok);
  }
  ++pos;
  return tokens;
}

int parse_dim(const std::string& s) {
  const int v = std::atoi(s.c_str());
  if (v <= 0) fail(ErrorKind::InvalidArgument, "invalid image dimension '" + s + "'");
  return v;
}

}  // namespace

void write_pfm(const fs::path& path, const Grid<float>& grid) {
  std::ostringstream header;
  header << "Pf\n" << grid.width << " " << grid.height << "\n-1.0\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  bytes.reserve(bytes.size() + grid.size() * 4);
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) put(bytes, grid.at(x, y));
  }
  write_file(path, bytes);
}

Grid<float> read_pfm(const fs::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  const auto tok = header_tokens(bytes, 4, pos);
  if (tok[0] != "Pf") fail(ErrorKind::MagicMismatch, path.string() + ": not a grayscale PFM");
  const int w = parse_dim(tok[1]), h = parse_dim(tok[2]);
  const double scale = std::atof(tok[3].c_str());
  if (scale >= 0) fail(ErrorKind::InvalidArgument, path.string() + ": big-endian PFM unsupported");
  Grid<float> grid(w, h);
  if (bytes.size() - pos < grid.size() * 4) fail(ErrorKind::Truncation, path.string() + ": truncated PFM");
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      std::memcpy(&grid.at(x, y), &bytes[pos], 4);
      pos += 4;
    }
  }
  return grid;
}

void write_pgm(const fs::path& path, const Grid<std::uint8_t>& grid) {
  std::ostringstream header;
  header << "P5\n" << grid.width << " " << grid.height << "\n255\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  bytes.insert(bytes.end(), grid.values.begin(), grid.values.end());
  write_file(path, bytes);
}

Grid<std::uint8_t> read_pgm(const fs::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  const auto tok = header_tokens(bytes, 4, pos);
  if (tok[0] != "P5") fail(ErrorKind::MagicMismatch, path.string() + ": not a binary PGM");
  if (tok[3] != "255") fail(ErrorKind::InvalidArgument, path.string() + ": PGM maxval must be 255");
  Grid<std::uint8_t> grid(parse_dim(tok[1]), parse_dim(tok[2]));
  if (bytes.size() - pos < grid.size()) fail(ErrorKind::Truncation, path.string() + ": truncated PGM");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), grid.size(), grid.values.begin());
  return grid;
}

void write_mask_pgm(const fs::path& path, const SemanticMask& mask) {
  Grid<std::uint8_t> g(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) g.values[i] = mask.values[i] ? 255 : 0;
  write_pgm(path, g);
}

SemanticMask read_mask_pgm(const fs::path& path) {
  auto g = read_pgm(path);
  for (auto& v : g.values) v = v >= 128 ? 1 : 0;
  return g;
}

// ---------------------------------------------------------------------------
// PNG via libpng

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void write_png(const fs::path& path, const ImageBuffer& image) {
  require(image.channels == 1 || image.channels == 3, ErrorKind::InvalidArgument,
          "write_png: expected 1 or 3 channels");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorKind::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i] = to_byte(image.samples[static_cast<std::size_t>(y) * row.size() + i]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageBuffer read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorKind::Io, "cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(ErrorKind::MagicMismatch, path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Io, "libpng failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  ImageBuffer image(w, h, channels == 1 ? 1 : 3);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    for (int c = 0; c < image.channels; ++c) {
      image.samples[i * image.channels + c] = data[i * channels + c] / 255.0f;
    }
  }
  return image;
}

void write_ply(const fs::path& path, std::span<const ColoredPoint> points) {
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out << std::setprecision(7);
  for (const auto& p : points) {
    out << static_cast<float>(p.position.x()) << ' ' << static_cast<float>(p.position.y()) << ' '
        << static_cast<float>(p.position.z()) << ' ' << int(p.r) << ' ' << int(p.g) << ' '
        << int(p.b) << '\n';
  }
  const std::string s = out.str();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

ImageBuffer colorize_depth(const DepthMap& depth, double zMin, double zMax) {
  ImageBuffer out(depth.width, depth.height, 3);
  const double span = std::max(zMax - zMin, 1e-9);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const double z = depth.at(x, y);
      if (!is_valid_depth(z)) continue;
      const double t = std::clamp((z - zMin) / span, 0.0, 1.0);
      // Near = warm, far = cool.
      const double r = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
      const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
      const double b = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
      out.at(x, y, 0) = static_cast<float>(r);
      out.at(x, y, 1) = static_cast<float>(g);
      out.at(x, y, 2) = static_cast<float>(b);
    }
  }
  return out;
}

}  // namespace wbs::io
