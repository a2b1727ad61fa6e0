#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "facmap/geo.hpp"
#include "facmap/image.hpp"

namespace facmap::scoring {

/// Probability assigned to one tile.
struct TileScore {
  geo::TileIndex tile;
  double probability = 0.0;

  friend bool operator==(const TileScore&, const TileScore&) = default;
};

/// Checked constructor: probability must lie in [0, 1].
TileScore make_tile_score(geo::TileIndex tile, double probability);

// Heuristic scorer constants. Synthetic facilities render as bright discs on
// dark terrain; a tile with >= 3% bright pixels scores above 0.88.
inline constexpr double kBrightLuminance = 200.0;
inline constexpr double kLogisticGain = 200.0;
inline constexpr double kBrightFractionMidpoint = 0.02;

/// Fraction of pixels whose luminance exceeds 200.
double bright_fraction(const TileImage& img);
/// sigma(200 * (bright_fraction - 0.02)).
double heuristic_score(const TileImage& img);

/// Anything that maps a tile image to a probability. score() must be safe to
/// call concurrently from several threads.
class TileScorer {
 public:
  virtual ~TileScorer() = default;
  virtual double score(const TileImage& img) const = 0;
};

class HeuristicScorer final : public TileScorer {
 public:
  double score(const TileImage& img) const override { return heuristic_score(img); }
};

/// Raised when the scorer fails on a tile; carries the tile address.
class ScoringError : public std::runtime_error {
 public:
  ScoringError(geo::TileIndex tile, const std::string& what);
  geo::TileIndex tile() const { return tile_; }

 private:
  geo::TileIndex tile_;
};

/// Scores every tile, possibly in parallel (workers = 0 uses all cores).
/// Output is sorted by (row, col) and independent of worker count.
std::vector<TileScore> score_batch(std::span<const std::pair<geo::TileIndex, TileImage>> tiles,
                                   const TileScorer& scorer, unsigned workers = 0);

// --- class activation maps -------------------------------------------------

inline constexpr int kFeatureMapSide = 15;
inline constexpr int kFeatureMapCells = kFeatureMapSide * kFeatureMapSide;

/// C x 15 x 15 activations, channel-major then row-major.
class FeatureMap {
 public:
  FeatureMap(std::uint32_t channels, std::vector<float> values);

  std::uint32_t channels() const { return channels_; }
  std::span<const float> values() const { return values_; }
  float at(std::uint32_t c, int y, int x) const {
    return values_[static_cast<std::size_t>(c) * kFeatureMapCells + y * kFeatureMapSide + x];
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::uint32_t channels_;
  std::vector<float> values_;
};

/// Weights of the final fully connected layer for the positive class.
class ClassifierWeights {
 public:
  explicit ClassifierWeights(std::vector<float> weights);

  std::size_t size() const { return weights_.size(); }
  std::span<const float> values() const { return weights_; }

  friend bool operator==(const ClassifierWeights&, const ClassifierWeights&) = default;

 private:
  std::vector<float> weights_;
};

struct Cam {
  using Raw = std::array<double, kFeatureMapCells>;
  static constexpr int kSide = geo::kTilePixels;

  /// max(0, sum_c w_c F_c), row-major 15x15.
  Raw raw{};
  /// Bilinear 500x500 resize of raw divided by its max; all zeros when raw is.
  std::vector<double> upsampled;

  double upsampled_at(int y, int x) const {
    return upsampled[static_cast<std::size_t>(y) * kSide + x];
  }
};

/// ReLU of the channel-weighted sum only. Throws ValidationError on a
/// channel-count mismatch.
Cam::Raw cam_raw(const FeatureMap& features, const ClassifierWeights& weights);

/// Resizes a 15x15 map to 500x500; output pixel (i, j) samples the source at
/// ((i + 0.5) * 15 / 500 - 0.5, (j + 0.5) * 15 / 500 - 0.5) clamped to [0, 14].
std::vector<double> bilinear_upsample(const Cam::Raw& raw);

Cam compute_cam(const FeatureMap& features, const ClassifierWeights& weights);

/// 8-bit quantization of the normalized CAM: round(255 * v).
std::vector<std::uint8_t> quantize_cam(const Cam& cam);

}  // namespace facmap::scoring
