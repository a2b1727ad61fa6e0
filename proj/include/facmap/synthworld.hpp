#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "facmap/geo.hpp"
#include "facmap/image.hpp"
#include "facmap/protocol.hpp"

namespace facmap::synthworld {

/// Minimum Chebyshev distance between facility centers in projected meters.
inline constexpr double kMinSeparationM = 4.0 * geo::kTileSideM;
inline constexpr int kDiscRadiusPx = 8;
/// Discs sit one per 20x20 cell of a 25x25 lattice, so they never overlap.
inline constexpr int kDiscCellPx = 20;
inline constexpr int kDiscCells = (geo::kTilePixels / kDiscCellPx) * (geo::kTilePixels / kDiscCellPx);
/// 40 discs of 197 pixels cover 3.15% of a tile, above the 3% floor.
inline constexpr int kMinDiscsPerTile = 40;
inline constexpr int kMaxTerrainChannel = 99;

struct PlantedFacility {
  geo::GeoPoint center{0.0, 0.0};
  int tank_count = 1;
  /// 1..4 tiles: the center tile, then neighbors toward the nearer tile edges.
  int footprint_tiles = 1;
};

struct WorldSpec {
  geo::BoundingRegion region{0.0, 0.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  std::vector<PlantedFacility> facilities;
  double noise_level = 0.5;
};

/// Throws ValidationError when a facility center lies outside the region, a
/// footprint leaves the region's tile range, two centers are closer than
/// kMinSeparationM (Chebyshev, projected), or fields are out of range.
void validate(const WorldSpec& spec);

/// Footprint tiles of one facility, sorted by (row, col).
std::vector<geo::TileIndex> footprint(const PlantedFacility& f);

/// Deterministic function of (seed, tile): dark terrain (every channel <= 99)
/// plus, on footprint tiles, max(40, tanks-per-tile) white discs of radius 8 px.
/// Throws DomainError when the tile is outside the region's tile range.
TileImage render_tile(const WorldSpec& spec, const geo::TileIndex& t);

struct ExpectedDetection {
  geo::GeoPoint center{0.0, 0.0};
  std::vector<geo::TileIndex> tiles;
  int tank_count = 0;
};

/// Components (4-adjacency) of the union of facility footprints, ordered by
/// first tile in (row, col) order. Tank counts of facilities sharing a
/// component are summed; the center is that of the first such facility.
std::vector<ExpectedDetection> ground_truth(const WorldSpec& spec);

/// Places `count` facilities on a jittered lattice of 6x6-tile cells so that
/// centers are more than four tile sides apart. Throws ValidationError when
/// the region is too small.
WorldSpec generate_world(const geo::BoundingRegion& region, std::uint64_t seed, int count,
                         double noise_level = 0.5);

nlohmann::ordered_json to_json(const WorldSpec& spec);
WorldSpec world_from_json(const nlohmann::json& j);
void write_world(const std::filesystem::path& path, const WorldSpec& spec);
WorldSpec read_world(const std::filesystem::path& path);

/// Renders tiles on demand; has() is true for every tile in the region.
class SyntheticImageSource final : public protocol::ImageSource {
 public:
  explicit SyntheticImageSource(WorldSpec spec);
  bool has(const geo::TileIndex& t) const override;
  TileImage fetch(const geo::TileIndex& t) const override;
  const WorldSpec& spec() const { return spec_; }

 private:
  WorldSpec spec_;
  geo::TileRange range_;
};

}  // namespace facmap::synthworld
