#pragma once

// File-level exchange with external scorers:
//   request   <dir>/{col}_{row}.png + <dir>/tiles.csv (col,row,filename)
//   response  scores.csv (col,row,probability) and optional {col}_{row}.ogfm
//   weights   *.ogfw
// .ogfm = "OGFM" u32le C, H, W, then C*H*W f32le (channel-major, row-major)
// .ogfw = "OGFW" u32le C, then C f32le

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facmap/geo.hpp"
#include "facmap/image.hpp"
#include "facmap/scoring.hpp"

namespace facmap::protocol {

std::string tile_stem(const geo::TileIndex& t);
std::string tile_png_name(const geo::TileIndex& t);
std::string tile_ogfm_name(const geo::TileIndex& t);

/// Supplies imagery per tile. fetch() must be safe to call concurrently.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual bool has(const geo::TileIndex& t) const = 0;
  virtual TileImage fetch(const geo::TileIndex& t) const = 0;
};

/// Directory of {col}_{row}.png tiles.
class DirectoryImageSource final : public ImageSource {
 public:
  explicit DirectoryImageSource(std::filesystem::path dir);
  bool has(const geo::TileIndex& t) const override;
  TileImage fetch(const geo::TileIndex& t) const override;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct ManifestEntry {
  geo::TileIndex tile;
  std::string filename;
};

/// Writes {col}_{row}.png for every tile plus tiles.csv into dir (created if needed).
void write_request(const std::filesystem::path& dir, std::span<const geo::TileIndex> tiles,
                   const ImageSource& source, unsigned workers = 0, int png_compression = 1);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

void write_scores(const std::filesystem::path& path, std::span<const scoring::TileScore> scores);
/// Parses scores.csv; rejects duplicates and out-of-range probabilities.
/// Result is sorted by (row, col).
std::vector<scoring::TileScore> read_scores(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_feature_map(const scoring::FeatureMap& fm);
scoring::FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes);
void write_feature_map(const std::filesystem::path& path, const scoring::FeatureMap& fm);
scoring::FeatureMap read_feature_map(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_weights(const scoring::ClassifierWeights& w);
scoring::ClassifierWeights decode_weights(std::span<const std::uint8_t> bytes);
void write_weights(const std::filesystem::path& path, const scoring::ClassifierWeights& w);
scoring::ClassifierWeights read_weights(const std::filesystem::path& path);

}  // namespace facmap::protocol
