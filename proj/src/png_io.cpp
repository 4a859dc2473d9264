#include "ppwarp/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <vector>

#include "ppwarp/errors.hpp"

namespace ppw {

namespace {

struct FileHandle {
  FILE* f = nullptr;
  FileHandle(const char* path, const char* mode) : f(std::fopen(path, mode)) {}
  ~FileHandle() {
    if (f) std::fclose(f);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
};

// libpng reports errors with longjmp, so the decode loop lives in its own
// frame: outputs are caller storage and nothing constructed after setjmp is
// touched on the failure path.
bool read_core(FILE* f, std::vector<unsigned char>& interleaved,
               png_uint_32& width, png_uint_32& height, int& channels) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  png_init_io(png, f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  const int passes = png_set_interlace_handling(png);
  png_read_update_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  channels = static_cast<int>(png_get_channels(png, info));
  if (width == 0 || height == 0 || (channels != 1 && channels != 3)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  const size_t stride =
      static_cast<size_t>(width) * static_cast<size_t>(channels);
  interleaved.assign(stride * height, 0);
  for (int p = 0; p < passes; ++p)
    for (png_uint_32 y = 0; y < height; ++y)
      png_read_row(png, interleaved.data() + stride * y, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_core(FILE* f, const std::vector<unsigned char>& interleaved,
                png_uint_32 width, png_uint_32 height, int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }

  png_init_io(png, f);
  // Fixed encoder settings keep output bytes reproducible across runs.
  png_set_compression_level(png, 6);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE,
               PNG_FILTER_TYPE_BASE);
  png_write_info(png, info);

  const size_t stride =
      static_cast<size_t>(width) * static_cast<size_t>(channels);
  for (png_uint_32 y = 0; y < height; ++y)
    png_write_row(png,
                  const_cast<png_bytep>(interleaved.data() + stride * y));
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Image read_png(const std::string& path) {
  FileHandle fh(path.c_str(), "rb");
  if (!fh.f) throw IoError("cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fh.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ValidationError("not a PNG file: " + path);

  std::vector<unsigned char> interleaved;
  png_uint_32 width = 0, height = 0;
  int channels = 0;
  if (!read_core(fh.f, interleaved, width, height, channels))
    throw ValidationError("malformed PNG: " + path);

  Image img = Image::make(
      {static_cast<int>(width), static_cast<int>(height)}, channels);
  const size_t stride =
      static_cast<size_t>(width) * static_cast<size_t>(channels);
  for (int c = 0; c < channels; ++c)
    for (png_uint_32 y = 0; y < height; ++y)
      for (png_uint_32 x = 0; x < width; ++x)
        img.at(c, static_cast<int>(x), static_cast<int>(y)) =
            static_cast<float>(
                interleaved[stride * y + x * static_cast<size_t>(channels) +
                            static_cast<size_t>(c)]) /
            255.0f;
  return img;
}

void write_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ValidationError("image must have 1 or 3 channels");
  if (img.size.w < 1 || img.size.h < 1 ||
      img.data.size() != static_cast<size_t>(img.channels) *
                             static_cast<size_t>(img.size.w) *
                             static_cast<size_t>(img.size.h))
    throw ValidationError("image buffer does not match its dimensions");

  const auto width = static_cast<png_uint_32>(img.size.w);
  const auto height = static_cast<png_uint_32>(img.size.h);
  const size_t stride =
      static_cast<size_t>(width) * static_cast<size_t>(img.channels);
  std::vector<unsigned char> interleaved(stride * height);
  for (int c = 0; c < img.channels; ++c)
    for (png_uint_32 y = 0; y < height; ++y)
      for (png_uint_32 x = 0; x < width; ++x) {
        const double s = std::floor(
            static_cast<double>(
                img.at(c, static_cast<int>(x), static_cast<int>(y))) *
                255.0 +
            0.5);
        const double clamped = s >= 0.0 ? (s <= 255.0 ? s : 255.0) : 0.0;
        interleaved[stride * y + x * static_cast<size_t>(img.channels) +
                    static_cast<size_t>(c)] =
            static_cast<unsigned char>(clamped);
      }

  FileHandle fh(path.c_str(), "wb");
  if (!fh.f) throw IoError("cannot open for writing: " + path);
  if (!write_core(fh.f, interleaved, width, height, img.channels))
    throw IoError("png encoding failed: " + path);
}

}  // namespace ppw
