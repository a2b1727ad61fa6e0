#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "facmap/geo.hpp"

namespace facmap {

/// 500x500 RGB8 tile, row-major, interleaved channels.
class TileImage {
 public:
  static constexpr int kWidth = geo::kTilePixels;
  static constexpr int kHeight = geo::kTilePixels;
  static constexpr int kChannels = 3;
  static constexpr std::size_t kBytes =
      static_cast<std::size_t>(kWidth) * kHeight * kChannels;

  /// All-black tile.
  TileImage();
  /// Takes ownership of a buffer of exactly kBytes; throws ValidationError otherwise.
  explicit TileImage(std::vector<std::uint8_t> pixels);

  static TileImage filled(std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &pixels_[(static_cast<std::size_t>(y) * kWidth + x) * kChannels];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  friend bool operator==(const TileImage&, const TileImage&) = default;

 private:
  std::vector<std::uint8_t> pixels_;
};

/// Rec. 601 luma of an RGB8 pixel, in [0, 255].
inline double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

namespace png {

/// Encodes an RGB8 tile.
std::vector<std::uint8_t> encode_rgb(const TileImage& image, int compression_level = 6);
/// Encodes a width x height 8-bit grayscale raster.
std::vector<std::uint8_t> encode_gray(std::span<const std::uint8_t> pixels, int width, int height);

struct DecodedImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB); alpha is stripped, palettes expanded
  std::vector<std::uint8_t> pixels;
};

DecodedImage decode(std::span<const std::uint8_t> bytes);

/// Reads a PNG file as a tile; must be 500x500 (gray is expanded to RGB).
TileImage read_tile(const std::filesystem::path& path);
void write_tile(const std::filesystem::path& path, const TileImage& image,
                int compression_level = 6);

}  // namespace png

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace facmap
