#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace facmap::geo {

/// Sphere radius used by the Web Mercator projection, meters.
inline constexpr double kMercatorRadiusM = 6378137.0;
/// Mean earth radius used for great-circle distances, kilometers.
inline constexpr double kHaversineRadiusKm = 6371.0;
/// Projected side length of one tile: 500 px at 2.5 m/px.
inline constexpr double kTileSideM = 1250.0;
inline constexpr int kTilePixels = 500;
/// Latitude limit (exclusive) of the Mercator validity band, degrees.
inline constexpr double kMaxMercatorLat = 85.06;

/// Geodetic coordinate in degrees. Construction rejects NaN and
/// out-of-range values.
class GeoPoint {
 public:
  GeoPoint(double lat, double lon);

  double lat() const { return lat_; }
  double lon() const { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_;
  double lon_;
};

/// Spherical Web Mercator coordinate, meters east/north of (0°, 0°).
struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const ProjectedPoint&, const ProjectedPoint&) = default;
};

/// Integer address of a tile on the global grid. Tile (col, row) owns the
/// half-open projected square [col*1250, (col+1)*1250) x [row*1250, (row+1)*1250).
/// Ordering is (row, col) ascending.
struct TileIndex {
  std::int32_t col = 0;
  std::int32_t row = 0;

  friend bool operator==(const TileIndex&, const TileIndex&) = default;
  friend std::strong_ordering operator<=>(const TileIndex& a, const TileIndex& b) {
    if (auto c = a.row <=> b.row; c != 0) return c;
    return a.col <=> b.col;
  }
};

struct TileIndexHash {
  std::size_t operator()(const TileIndex& t) const noexcept {
    auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.col)) << 32) |
               static_cast<std::uint32_t>(t.row);
    return std::hash<std::uint64_t>{}(key);
  }
};

/// Axis-aligned lat/lon box; min < max on both axes. Containment is inclusive.
class BoundingRegion {
 public:
  BoundingRegion(double min_lat, double min_lon, double max_lat, double max_lon);

  double min_lat() const { return min_lat_; }
  double min_lon() const { return min_lon_; }
  double max_lat() const { return max_lat_; }
  double max_lon() const { return max_lon_; }

  bool contains(const GeoPoint& p) const;

  friend bool operator==(const BoundingRegion&, const BoundingRegion&) = default;

 private:
  double min_lat_, min_lon_, max_lat_, max_lon_;
};

/// Inclusive range of tile columns and rows.
struct TileRange {
  std::int32_t min_col = 0, max_col = -1;
  std::int32_t min_row = 0, max_row = -1;

  bool empty() const { return max_col < min_col || max_row < min_row; }
  std::size_t size() const;
  bool contains(const TileIndex& t) const {
    return t.col >= min_col && t.col <= max_col && t.row >= min_row && t.row <= max_row;
  }
};

/// Throws DomainError when |lat| is outside the Mercator band.
ProjectedPoint project(const GeoPoint& p);
GeoPoint unproject(const ProjectedPoint& q);

/// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

TileIndex tile_of(const GeoPoint& p);
TileIndex tile_of_projected(const ProjectedPoint& q);

/// Projected center of a tile footprint.
ProjectedPoint tile_center_projected(const TileIndex& t);
GeoPoint tile_centroid(const TileIndex& t);

/// Tiles whose footprint intersects the projected region.
TileRange tile_range(const BoundingRegion& region);

/// Every tile of tile_range(region), sorted by (row, col).
std::vector<TileIndex> enumerate_tiles(const BoundingRegion& region);

}  // namespace facmap::geo
