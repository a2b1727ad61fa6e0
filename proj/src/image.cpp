#include "facmap/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "facmap/errors.hpp"

namespace facmap {

TileImage::TileImage() : pixels_(kBytes, 0) {}

TileImage::TileImage(std::vector<std::uint8_t> pixels) : pixels_(std::move(pixels)) {
  if (pixels_.size() != kBytes)
    throw ValidationError("TileImage: expected " + std::to_string(kBytes) + " bytes, got " +
                          std::to_string(pixels_.size()));
}

TileImage TileImage::filled(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> px(kBytes);
  for (std::size_t i = 0; i < kBytes; i += 3) {
    px[i] = r;
    px[i + 1] = g;
    px[i + 2] = b;
  }
  return TileImage(std::move(px));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

namespace png {
namespace {

[[noreturn]] void on_png_error(png_structp, png_const_charp msg) {
  throw IoError(std::string("png: ") + msg);
}
void on_png_warning(png_structp, png_const_charp) {}

void append_bytes(png_structp ctx, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(ctx));
  out->insert(out->end(), data, data + length);
}
void flush_noop(png_structp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_bytes(png_structp ctx, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(ctx));
  if (cur->offset + length > cur->bytes.size()) png_error(ctx, "truncated stream");
  std::memcpy(data, cur->bytes.data() + cur->offset, length);
  cur->offset += length;
}

std::vector<std::uint8_t> encode(const std::uint8_t* pixels, int width, int height,
                                 int color_type, int channels, int level) {
  png_structp ctx =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
  if (!ctx) throw IoError("png: cannot allocate writer");
  png_infop info = png_create_info_struct(ctx);
  std::vector<std::uint8_t> out;
  try {
    if (!info) throw IoError("png: cannot allocate info");
    png_set_write_fn(ctx, &out, append_bytes, flush_noop);
    png_set_compression_level(ctx, level);
    png_set_IHDR(ctx, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx, info);
    const auto stride = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y)
      png_write_row(ctx, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * stride));
    png_write_end(ctx, nullptr);
  } catch (...) {
    png_destroy_write_struct(&ctx, &info);
    throw;
  }
  png_destroy_write_struct(&ctx, &info);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_rgb(const TileImage& image, int compression_level) {
  return encode(image.pixels().data(), TileImage::kWidth, TileImage::kHeight, PNG_COLOR_TYPE_RGB,
                3, compression_level);
}

std::vector<std::uint8_t> encode_gray(std::span<const std::uint8_t> pixels, int width,
                                      int height) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw ValidationError("encode_gray: buffer size does not match dimensions");
  return encode(pixels.data(), width, height, PNG_COLOR_TYPE_GRAY, 1, 6);
}

DecodedImage decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw IoError("png: bad signature");
  png_structp ctx =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
  if (!ctx) throw IoError("png: cannot allocate reader");
  png_infop info = png_create_info_struct(ctx);
  ReadCursor cursor{bytes, 0};
  DecodedImage img;
  try {
    if (!info) throw IoError("png: cannot allocate info");
    png_set_read_fn(ctx, &cursor, read_bytes);
    png_read_info(ctx, info);
    const auto color = png_get_color_type(ctx, info);
    const auto depth = png_get_bit_depth(ctx, info);
    if (depth == 16) png_set_strip_16(ctx);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx);
    const bool has_trns = png_get_valid(ctx, info, PNG_INFO_tRNS) != 0;
    if (has_trns) png_set_tRNS_to_alpha(ctx);
    if ((color & PNG_COLOR_MASK_ALPHA) || has_trns) png_set_strip_alpha(ctx);
    png_read_update_info(ctx, info);
    img.width = static_cast<int>(png_get_image_width(ctx, info));
    img.height = static_cast<int>(png_get_image_height(ctx, info));
    img.channels = png_get_channels(ctx, info);
    const auto stride = png_get_rowbytes(ctx, info);
    img.pixels.resize(stride * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
      png_read_row(ctx, img.pixels.data() + static_cast<std::size_t>(y) * stride, nullptr);
    png_read_end(ctx, nullptr);
  } catch (...) {
    png_destroy_read_struct(&ctx, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&ctx, &info, nullptr);
  return img;
}

TileImage read_tile(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  auto img = decode(bytes);
  if (img.width != TileImage::kWidth || img.height != TileImage::kHeight)
    throw ValidationError(path.string() + ": expected 500x500 tile, got " +
                          std::to_string(img.width) + "x" + std::to_string(img.height));
  if (img.channels == 3) return TileImage(std::move(img.pixels));
  if (img.channels == 1) {
    std::vector<std::uint8_t> rgb(TileImage::kBytes);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = img.pixels[i];
    return TileImage(std::move(rgb));
  }
  throw ValidationError(path.string() + ": unsupported channel count");
}

void write_tile(const std::filesystem::path& path, const TileImage& image,
                int compression_level) {
  write_file_bytes(path, encode_rgb(image, compression_level));
}

}  // namespace png
}  // namespace facmap
