#include "facmap/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "facmap/errors.hpp"

namespace facmap::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::int32_t floor_index(double meters) {
  return static_cast<std::int32_t>(std::floor(meters / kTileSideM));
}

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  if (std::isnan(lat) || std::isnan(lon)) throw ValidationError("GeoPoint: NaN coordinate");
  if (lat < -90.0 || lat > 90.0)
    throw ValidationError("GeoPoint: latitude " + std::to_string(lat) + " outside [-90, 90]");
  if (lon < -180.0 || lon > 180.0)
    throw ValidationError("GeoPoint: longitude " + std::to_string(lon) + " outside [-180, 180]");
}

BoundingRegion::BoundingRegion(double min_lat, double min_lon, double max_lat, double max_lon)
    : min_lat_(min_lat), min_lon_(min_lon), max_lat_(max_lat), max_lon_(max_lon) {
  // Corner construction validates ranges and NaN.
  GeoPoint lo(min_lat, min_lon);
  GeoPoint hi(max_lat, max_lon);
  if (!(min_lat < max_lat) || !(min_lon < max_lon))
    throw ValidationError("BoundingRegion: min must be < max on both axes");
}

bool BoundingRegion::contains(const GeoPoint& p) const {
  return p.lat() >= min_lat_ && p.lat() <= max_lat_ && p.lon() >= min_lon_ &&
         p.lon() <= max_lon_;
}

std::size_t TileRange::size() const {
  if (empty()) return 0;
  return static_cast<std::size_t>(max_col - min_col + 1) *
         static_cast<std::size_t>(max_row - min_row + 1);
}

ProjectedPoint project(const GeoPoint& p) {
  if (!(std::abs(p.lat()) < kMaxMercatorLat))
    throw DomainError("project: latitude " + std::to_string(p.lat()) +
                      " outside Mercator band");
  const double lambda = p.lon() * kDegToRad;
  const double phi = p.lat() * kDegToRad;
  return {kMercatorRadiusM * lambda,
          kMercatorRadiusM * std::atanh(std::sin(phi))};
}

GeoPoint unproject(const ProjectedPoint& q) {
  if (!std::isfinite(q.x) || !std::isfinite(q.y))
    throw DomainError("unproject: non-finite coordinate");
  const double lambda = q.x / kMercatorRadiusM;
  const double phi = std::atan(std::sinh(q.y / kMercatorRadiusM));
  double lon = lambda * kRadToDeg;
  // x = +-R*pi can land a few ulps past the antimeridian; beyond that, wrap.
  if (std::abs(lon) > 180.0) {
    if (std::abs(lon) - 180.0 < 1e-9)
      lon = std::copysign(180.0, lon);
    else
      lon = std::remainder(lon, 360.0);
  }
  return {phi * kRadToDeg, lon};
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat() * kDegToRad;
  const double phi2 = b.lat() * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon() - a.lon()) * kDegToRad;
  const double s = std::sin(dphi / 2.0);
  const double t = std::sin(dlambda / 2.0);
  const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kHaversineRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

TileIndex tile_of_projected(const ProjectedPoint& q) {
  return {floor_index(q.x), floor_index(q.y)};
}

TileIndex tile_of(const GeoPoint& p) { return tile_of_projected(project(p)); }

ProjectedPoint tile_center_projected(const TileIndex& t) {
  return {(static_cast<double>(t.col) + 0.5) * kTileSideM,
          (static_cast<double>(t.row) + 0.5) * kTileSideM};
}

GeoPoint tile_centroid(const TileIndex& t) { return unproject(tile_center_projected(t)); }

TileRange tile_range(const BoundingRegion& region) {
  const auto lo = project(GeoPoint(region.min_lat(), region.min_lon()));
  const auto hi = project(GeoPoint(region.max_lat(), region.max_lon()));
  // A half-open footprint [a, a+s) meets the closed interval [lo, hi] iff
  // floor(lo/s) <= col <= floor(hi/s).
  return {floor_index(lo.x), floor_index(hi.x), floor_index(lo.y), floor_index(hi.y)};
}

std::vector<TileIndex> enumerate_tiles(const BoundingRegion& region) {
  const auto range = tile_range(region);
  std::vector<TileIndex> tiles;
  tiles.reserve(range.size());
  for (auto row = range.min_row; row <= range.max_row; ++row)
    for (auto col = range.min_col; col <= range.max_col; ++col) tiles.push_back({col, row});
  return tiles;
}

}  // namespace facmap::geo
