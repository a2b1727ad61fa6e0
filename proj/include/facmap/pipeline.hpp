#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "facmap/errors.hpp"
#include "facmap/geo.hpp"
#include "facmap/protocol.hpp"
#include "facmap/scoring.hpp"

namespace facmap::pipeline {

/// Probability threshold in [0, 1]; a tile is positive when probability >= threshold.
class OperatingPoint {
 public:
  explicit OperatingPoint(double threshold);
  double threshold() const { return threshold_; }

 private:
  double threshold_;
};

/// Neighborhood used when merging positive tiles. Four-connectivity (edge
/// sharing) is the default; eight adds diagonal neighbors.
enum class Adjacency { four, eight };

std::string to_string(Adjacency a);
Adjacency parse_adjacency(const std::string& text);

struct ExclusionZone {
  geo::BoundingRegion region;
  std::string reason;
};

/// A connected group of positive tiles reduced to one location.
struct Detection {
  std::string id;
  /// Member tiles with their scores, sorted by (row, col).
  std::vector<scoring::TileScore> members;
  /// Unprojected mean of the members' projected tile centers.
  geo::GeoPoint centroid{0.0, 0.0};
  double max_probability = 0.0;
  double mean_probability = 0.0;

  std::size_t tile_count() const { return members.size(); }
  /// Highest-probability member; ties go to the first in (row, col) order.
  const scoring::TileScore& best_member() const;
};

/// Builds a detection from its members (any order). Throws ValidationError when empty.
Detection make_detection(std::vector<scoring::TileScore> members);

/// "det_{col}_{row}" of the first member tile in (row, col) order.
std::string detection_id(const geo::TileIndex& anchor);

using TileSet = std::set<geo::TileIndex>;
using ScoreLookup = std::unordered_map<geo::TileIndex, double, geo::TileIndexHash>;

TileSet apply_threshold(std::span<const scoring::TileScore> scores, const OperatingPoint& op);

ScoreLookup make_lookup(std::span<const scoring::TileScore> scores);

/// Connected components of the positive set. Detections are ordered by their
/// first member in (row, col) order. Throws ValidationError when a positive
/// tile has no score.
std::vector<Detection> merge_positive_tiles(const TileSet& positive, const ScoreLookup& scores,
                                            Adjacency adjacency = Adjacency::four);

struct FilterResult {
  std::vector<Detection> kept;
  /// removed_per_zone[i] counts detections dropped by zone i; a detection
  /// inside several zones is charged to the first one.
  std::vector<std::size_t> removed_per_zone;
};

FilterResult filter_exclusions(std::vector<Detection> detections,
                               std::span<const ExclusionZone> zones);

struct DeploymentConfig {
  OperatingPoint op{0.5};
  std::vector<ExclusionZone> zones;
  Adjacency adjacency = Adjacency::four;
  /// Scoring threads; each holds at most one tile image at a time.
  unsigned workers = 0;
};

struct ExclusionSummary {
  std::string reason;
  geo::BoundingRegion region;
  std::size_t removed = 0;
};

struct RunManifest {
  std::optional<geo::BoundingRegion> region;
  std::size_t tile_count = 0;
  std::size_t positive_count = 0;
  std::size_t detection_count = 0;
  double threshold = 0.0;
  Adjacency adjacency = Adjacency::four;
  std::vector<ExclusionSummary> exclusions;
  double wall_time_s = 0.0;

  nlohmann::ordered_json to_json(bool include_wall_time = true) const;
};

struct DeploymentResult {
  std::vector<Detection> detections;
  std::vector<scoring::TileScore> scores;
  RunManifest manifest;
};

/// Raised before any scoring when the image source lacks tiles of the region.
class MissingImageryError : public NotFoundError {
 public:
  explicit MissingImageryError(std::vector<geo::TileIndex> missing);
  const std::vector<geo::TileIndex>& missing() const { return missing_; }

 private:
  std::vector<geo::TileIndex> missing_;
};

/// enumerate -> fetch + score (parallel, bounded) -> threshold -> merge -> filter.
DeploymentResult run_deployment(const geo::BoundingRegion& region,
                                const protocol::ImageSource& images,
                                const scoring::TileScorer& scorer, const DeploymentConfig& config);

/// The post-scoring tail of run_deployment for precomputed scores.
DeploymentResult detect_from_scores(std::vector<scoring::TileScore> scores,
                                    const DeploymentConfig& config,
                                    std::optional<geo::BoundingRegion> region = std::nullopt);

// --- export ----------------------------------------------------------------

nlohmann::ordered_json region_to_json(const geo::BoundingRegion& r);
geo::BoundingRegion region_from_json(const nlohmann::json& j);
/// "min_lat,min_lon,max_lat,max_lon"
geo::BoundingRegion parse_region(const std::string& text);

std::vector<ExclusionZone> read_exclusion_zones(const std::filesystem::path& path);

/// FeatureCollection of Point features. Besides id, max_probability,
/// mean_probability and tile_count each feature carries "tiles":
/// [[col, row, probability], ...] so detections can be reloaded losslessly.
nlohmann::ordered_json detections_to_geojson(std::span<const Detection> detections);
std::vector<Detection> detections_from_geojson(const nlohmann::json& fc);

void write_detections_geojson(const std::filesystem::path& path,
                              std::span<const Detection> detections);
void write_detections_csv(const std::filesystem::path& path, std::span<const Detection> detections);
std::vector<Detection> read_detections_geojson(const std::filesystem::path& path);

}  // namespace facmap::pipeline
