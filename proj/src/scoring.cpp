#include "facmap/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "facmap/errors.hpp"
#include "facmap/parallel.hpp"

namespace facmap::scoring {

TileScore make_tile_score(geo::TileIndex tile, double probability) {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw ValidationError("tile score probability " + std::to_string(probability) +
                          " outside [0, 1]");
  return {tile, probability};
}

double bright_fraction(const TileImage& img) {
  // Integer form of 0.299 R + 0.587 G + 0.114 B > 200, exact at the boundary.
  const auto px = img.pixels();
  std::size_t bright = 0;
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const unsigned luma1000 = 299u * px[i] + 587u * px[i + 1] + 114u * px[i + 2];
    bright += luma1000 > 200000u;
  }
  return static_cast<double>(bright) / static_cast<double>(px.size() / 3);
}

double heuristic_score(const TileImage& img) {
  const double f = bright_fraction(img);
  return 1.0 / (1.0 + std::exp(-kLogisticGain * (f - kBrightFractionMidpoint)));
}

ScoringError::ScoringError(geo::TileIndex tile, const std::string& what)
    : std::runtime_error("scoring failed on tile " + std::to_string(tile.col) + "_" +
                         std::to_string(tile.row) + ": " + what),
      tile_(tile) {}

std::vector<TileScore> score_batch(std::span<const std::pair<geo::TileIndex, TileImage>> tiles,
                                   const TileScorer& scorer, unsigned workers) {
  std::vector<TileScore> out(tiles.size());
  parallel_for_index(tiles.size(), workers, [&](std::size_t i) {
    const auto& [tile, image] = tiles[i];
    double p = 0.0;
    try {
      p = scorer.score(image);
    } catch (const std::exception& e) {
      throw ScoringError(tile, e.what());
    }
    if (!(p >= 0.0 && p <= 1.0))
      throw ScoringError(tile, "probability " + std::to_string(p) + " outside [0, 1]");
    out[i] = {tile, p};
  });
  std::sort(out.begin(), out.end(),
            [](const TileScore& a, const TileScore& b) { return a.tile < b.tile; });
  return out;
}

FeatureMap::FeatureMap(std::uint32_t channels, std::vector<float> values)
    : channels_(channels), values_(std::move(values)) {
  if (channels_ == 0) throw ValidationError("FeatureMap: zero channels");
  if (values_.size() != static_cast<std::size_t>(channels_) * kFeatureMapCells)
    throw ValidationError("FeatureMap: expected " + std::to_string(channels_) +
                          "x15x15 values, got " + std::to_string(values_.size()));
}

ClassifierWeights::ClassifierWeights(std::vector<float> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ValidationError("ClassifierWeights: empty weight vector");
}

Cam::Raw cam_raw(const FeatureMap& features, const ClassifierWeights& weights) {
  if (weights.size() != features.channels())
    throw ValidationError("compute_cam: " + std::to_string(weights.size()) +
                          " weights for " + std::to_string(features.channels()) +
                          " feature channels");
  Cam::Raw raw{};
  const auto w = weights.values();
  const auto v = features.values();
  for (std::size_t c = 0; c < w.size(); ++c) {
    const double wc = w[c];
    const float* plane = v.data() + c * kFeatureMapCells;
    for (int k = 0; k < kFeatureMapCells; ++k) raw[k] += wc * static_cast<double>(plane[k]);
  }
  for (auto& value : raw) value = std::max(0.0, value);
  return raw;
}

std::vector<double> bilinear_upsample(const Cam::Raw& raw) {
  constexpr int kOut = Cam::kSide;
  constexpr int kIn = kFeatureMapSide;
  constexpr double kScale = static_cast<double>(kIn) / kOut;

  struct Tap {
    int lo, hi;
    double frac;
  };
  std::array<Tap, kOut> taps{};
  for (int i = 0; i < kOut; ++i) {
    const double s = std::clamp((i + 0.5) * kScale - 0.5, 0.0, static_cast<double>(kIn - 1));
    const int lo = static_cast<int>(std::floor(s));
    taps[i] = {lo, std::min(lo + 1, kIn - 1), s - lo};
  }

  std::vector<double> out(static_cast<std::size_t>(kOut) * kOut);
  for (int y = 0; y < kOut; ++y) {
    const auto& ty = taps[y];
    for (int x = 0; x < kOut; ++x) {
      const auto& tx = taps[x];
      const double top = raw[ty.lo * kIn + tx.lo] * (1.0 - tx.frac) + raw[ty.lo * kIn + tx.hi] * tx.frac;
      const double bottom =
          raw[ty.hi * kIn + tx.lo] * (1.0 - tx.frac) + raw[ty.hi * kIn + tx.hi] * tx.frac;
      out[static_cast<std::size_t>(y) * kOut + x] = top * (1.0 - ty.frac) + bottom * ty.frac;
    }
  }
  return out;
}

Cam compute_cam(const FeatureMap& features, const ClassifierWeights& weights) {
  Cam cam;
  cam.raw = cam_raw(features, weights);
  cam.upsampled = bilinear_upsample(cam.raw);
  const double peak = *std::max_element(cam.upsampled.begin(), cam.upsampled.end());
  if (peak > 0.0) {
    for (auto& v : cam.upsampled) v /= peak;
  } else {
    std::fill(cam.upsampled.begin(), cam.upsampled.end(), 0.0);
  }
  return cam;
}

std::vector<std::uint8_t> quantize_cam(const Cam& cam) {
  std::vector<std::uint8_t> out(cam.upsampled.size());
  std::transform(cam.upsampled.begin(), cam.upsampled.end(), out.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return out;
}

}  // namespace facmap::scoring
