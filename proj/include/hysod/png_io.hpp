#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "hysod/image.hpp"

namespace hysod {

/// Decoded 8-bit PNG, interleaved row-major samples.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 = grayscale, 3 = RGB
  std::vector<std::uint8_t> pixels;
};

namespace png_detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::uint8_t* data, std::size_t len) {
  put_u32_be(out, static_cast<std::uint32_t>(len));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  if (len) out.insert(out.end(), data, data + len);
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32_be(out, crc);
}

inline std::uint8_t paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

}  // namespace png_detail

/// Encodes an 8-bit grayscale (channels == 1) or RGB (channels == 3) PNG.
/// Deterministic output for a given input.
inline std::vector<std::uint8_t> encode_png(int width, int height, int channels,
                                            const std::uint8_t* pixels) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
    throw DataError("encode_png: unsupported geometry");
  using namespace png_detail;

  // Raw stream: one filter byte (0 = none) per scanline.
  std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(&raw[y * (stride + 1) + 1], pixels + y * stride, stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw DataError("encode_png: deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(width);
  ihdr[4] = static_cast<std::uint8_t>(height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(height);
  ihdr[8] = 8;                                    // bit depth
  ihdr[9] = channels == 1 ? 0 : 2;                // color type
  ihdr[10] = 0;                                   // compression
  ihdr[11] = 0;                                   // filter method
  ihdr[12] = 0;                                   // no interlace
  append_chunk(out, "IHDR", ihdr, 13);
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);
  return out;
}

/// Decodes an 8-bit PNG. Gray+alpha and RGBA inputs drop alpha; palette and
/// 16-bit depths are rejected.
inline PngImage decode_png(const std::uint8_t* data, std::size_t size) {
  using namespace png_detail;
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (size < 8 || std::memcmp(data, sig, 8) != 0) throw DataError("not a PNG file");

  int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool seen_iend = false;
  while (pos + 8 <= size && !seen_iend) {
    std::uint32_t len = get_u32_be(data + pos);
    if (pos + 12 + len > size) throw DataError("truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(data + pos + 4);
    const std::uint8_t* payload = data + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32_be(payload));
      height = static_cast<int>(get_u32_be(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0) throw DataError("PNG missing IHDR");
  if (bit_depth != 8) throw DataError("unsupported PNG bit depth " + std::to_string(bit_depth));
  if (interlace != 0) throw DataError("interlaced PNG not supported");
  int src_channels;
  switch (color_type) {
    case 0: src_channels = 1; break;
    case 2: src_channels = 3; break;
    case 4: src_channels = 2; break;
    case 6: src_channels = 4; break;
    default: throw DataError("unsupported PNG color type " + std::to_string(color_type));
  }

  std::size_t stride = static_cast<std::size_t>(width) * src_channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || raw_len != raw.size()) throw DataError("PNG inflate failed");

  // Undo scanline filters in place.
  int bpp = src_channels;
  std::vector<std::uint8_t> prior(stride, 0);
  std::vector<std::uint8_t> recon(stride);
  std::vector<std::uint8_t> out_pixels(stride * height);
  for (int y = 0; y < height; ++y) {
    std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* line = &raw[y * (stride + 1) + 1];
    for (std::size_t i = 0; i < stride; ++i) {
      int a = i >= static_cast<std::size_t>(bpp) ? recon[i - bpp] : 0;
      int b = prior[i];
      int c = i >= static_cast<std::size_t>(bpp) ? prior[i - bpp] : 0;
      int x = line[i];
      switch (filter) {
        case 0: recon[i] = static_cast<std::uint8_t>(x); break;
        case 1: recon[i] = static_cast<std::uint8_t>(x + a); break;
        case 2: recon[i] = static_cast<std::uint8_t>(x + b); break;
        case 3: recon[i] = static_cast<std::uint8_t>(x + ((a + b) >> 1)); break;
        case 4: recon[i] = static_cast<std::uint8_t>(x + paeth(a, b, c)); break;
        default: throw DataError("invalid PNG filter type");
      }
    }
    std::memcpy(&out_pixels[y * stride], recon.data(), stride);
    prior = recon;
  }

  PngImage img;
  img.width = width;
  img.height = height;
  if (src_channels == 1 || src_channels == 3) {
    img.channels = src_channels;
    img.pixels = std::move(out_pixels);
  } else {
    // Drop the alpha channel.
    img.channels = src_channels == 2 ? 1 : 3;
    img.pixels.resize(static_cast<std::size_t>(width) * height * img.channels);
    std::size_t n = static_cast<std::size_t>(width) * height;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < img.channels; ++c)
        img.pixels[i * img.channels + c] = out_pixels[i * src_channels + c];
  }
  return img;
}

inline PngImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes.data(), bytes.size());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      const std::uint8_t* pixels) {
  auto bytes = encode_png(width, height, channels, pixels);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::uint8_t quantize8(double v) {
  double q = std::lround(clamp01(v) * 255.0);
  return static_cast<std::uint8_t>(q);
}

/// 8-bit grayscale round trip used for every label on disk.
inline void save_map_png(const std::filesystem::path& path, const Map& m) {
  std::vector<std::uint8_t> px(m.v.size());
  for (std::size_t i = 0; i < m.v.size(); ++i) px[i] = quantize8(m.v[i]);
  write_png(path, m.w, m.h, 1, px.data());
}

inline Map load_map_png(const std::filesystem::path& path) {
  PngImage png = read_png(path);
  Map m(png.height, png.width);
  std::size_t n = m.v.size();
  if (png.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) m.v[i] = png.pixels[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      int sum = png.pixels[i * 3] + png.pixels[i * 3 + 1] + png.pixels[i * 3 + 2];
      m.v[i] = std::lround(sum / 3.0) / 255.0;
    }
  }
  return m;
}

inline void save_image_png(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(img.h) * img.w * 3);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c)
        px[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] = quantize8(img.at(c, y, x));
  write_png(path, img.w, img.h, 3, px.data());
}

inline Image load_image_png(const std::filesystem::path& path) {
  PngImage png = read_png(path);
  Image img(png.height, png.width);
  std::size_t n = static_cast<std::size_t>(png.height) * png.width;
  if (png.channels == 3) {
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c)
        img.v[static_cast<std::size_t>(c) * n + i] = png.pixels[i * 3 + c] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) img.v[static_cast<std::size_t>(c) * n + i] = png.pixels[i] / 255.0;
  }
  return img;
}

/// Quantizes a map to the 8-bit grid without writing it out; matches the PNG
/// round trip exactly.
inline Map quantize_map(const Map& m) {
  Map out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = quantize8(m.v[i]) / 255.0;
  return out;
}

}  // namespace hysod
