#include "splatmesh/image_io.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "splatmesh/error.hpp"

namespace splatmesh {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw InputError(std::string("png: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

void write_png_impl(const std::filesystem::path& path, int width, int height, int color_type,
                    int bit_depth, const std::vector<std::vector<png_byte>>& rows) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& r : rows) png_write_row(png, r.data());
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RgbImage read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  RgbImage out;
  try {
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    out = RgbImage(width, height, channels);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = out.row(y).data();
    png_read_image(png, rows.data());
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::filesystem::path& path, const Image<std::uint8_t>& image) {
  int color_type = 0;
  switch (image.channels()) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    default: throw InputError("write_png: unsupported channel count");
  }
  std::vector<std::vector<png_byte>> rows(image.height());
  for (int y = 0; y < image.height(); ++y) {
    auto r = image.row(y);
    rows[y].assign(r.begin(), r.end());
  }
  write_png_impl(path, image.width(), image.height(), color_type, 8, rows);
}

Mask read_mask_png(const std::filesystem::path& path) {
  RgbImage img = read_png(path);
  Mask mask(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      bool on = false;
      for (int c = 0; c < img.channels(); ++c) on = on || img(x, y, c) != 0;
      mask(x, y) = on ? 1 : 0;
    }
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  const int row_bytes = (mask.width() + 7) / 8;
  std::vector<std::vector<png_byte>> rows(mask.height(), std::vector<png_byte>(row_bytes, 0));
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) rows[y][x / 8] |= static_cast<png_byte>(0x80u >> (x % 8));
  write_png_impl(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, rows);
}

FloatImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (!in || magic != "Pf" || width <= 0 || height <= 0)
    throw InputError("unsupported PFM: " + path.string());
  const bool little = scale < 0.0;
  FloatImage img(width, height);
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) throw InputError("truncated PFM: " + path.string());
    for (int x = 0; x < width; ++x) {
      std::uint32_t bits = raw[x];
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      img(x, y) = std::bit_cast<float>(bits);
    }
  }
  return img;
}

void write_pfm(const std::filesystem::path& path, const FloatImage& image) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "Pf\n" << image.width() << " " << image.height() << "\n-1.0\n";
  for (int y = image.height() - 1; y >= 0; --y) {
    auto r = image.row(y);
    out.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size() * 4));
  }
}

GrayImage to_gray(const RgbImage& rgb) {
  if (rgb.channels() == 1) return rgb;
  GrayImage gray(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x) {
      const unsigned v = 77u * rgb(x, y, 0) + 150u * rgb(x, y, 1) + 29u * rgb(x, y, 2);
      gray(x, y) = static_cast<std::uint8_t>((v + 128u) >> 8);
    }
  return gray;
}

}  // namespace splatmesh
