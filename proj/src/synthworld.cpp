#include "facmap/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include "facmap/errors.hpp"
#include "facmap/pipeline.hpp"

namespace facmap::synthworld {
namespace {

constexpr int kCellTiles = 6;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 tile_rng(std::uint64_t seed, const geo::TileIndex& t) {
  const auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.col)) << 32) |
                   static_cast<std::uint32_t>(t.row);
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ key));
}

// Uniform in [0, 1) from the top 53 bits; avoids library distributions whose
// output is implementation-defined.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

void draw_disc(TileImage& img, int cx, int cy) {
  for (int dy = -kDiscRadiusPx; dy <= kDiscRadiusPx; ++dy)
    for (int dx = -kDiscRadiusPx; dx <= kDiscRadiusPx; ++dx)
      if (dx * dx + dy * dy <= kDiscRadiusPx * kDiscRadiusPx) img.set(cx + dx, cy + dy, 255, 255, 255);
}

}  // namespace

std::vector<geo::TileIndex> footprint(const PlantedFacility& f) {
  const auto q = geo::project(f.center);
  const auto anchor = geo::tile_of_projected(q);
  const double fx = q.x / geo::kTileSideM - anchor.col;
  const double fy = q.y / geo::kTileSideM - anchor.row;
  const int dx = fx >= 0.5 ? 1 : -1;
  const int dy = fy >= 0.5 ? 1 : -1;
  std::vector<geo::TileIndex> tiles{anchor};
  if (f.footprint_tiles >= 2) tiles.push_back({anchor.col + dx, anchor.row});
  if (f.footprint_tiles >= 3) tiles.push_back({anchor.col, anchor.row + dy});
  if (f.footprint_tiles >= 4) tiles.push_back({anchor.col + dx, anchor.row + dy});
  std::sort(tiles.begin(), tiles.end());
  return tiles;
}

void validate(const WorldSpec& spec) {
  if (!(spec.noise_level >= 0.0 && spec.noise_level <= 1.0))
    throw ValidationError("world: noise_level must be in [0, 1]");
  const auto range = geo::tile_range(spec.region);
  std::vector<geo::ProjectedPoint> centers;
  for (std::size_t i = 0; i < spec.facilities.size(); ++i) {
    const auto& f = spec.facilities[i];
    const auto tag = "world: facility " + std::to_string(i) + ": ";
    if (f.footprint_tiles < 1 || f.footprint_tiles > 4)
      throw ValidationError(tag + "footprint_tiles must be 1..4");
    if (f.tank_count < 1) throw ValidationError(tag + "tank_count must be positive");
    if ((f.tank_count + f.footprint_tiles - 1) / f.footprint_tiles > kDiscCells)
      throw ValidationError(tag + "too many tanks to render");
    if (!spec.region.contains(f.center)) throw ValidationError(tag + "center outside region");
    for (const auto& t : footprint(f))
      if (!range.contains(t)) throw ValidationError(tag + "footprint leaves the region");
    const auto q = geo::project(f.center);
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const double cheb = std::max(std::abs(q.x - centers[j].x), std::abs(q.y - centers[j].y));
      if (cheb < kMinSeparationM)
        throw ValidationError(tag + "closer than four tile sides to facility " + std::to_string(j));
    }
    centers.push_back(q);
  }
}

TileImage render_tile(const WorldSpec& spec, const geo::TileIndex& t) {
  if (!geo::tile_range(spec.region).contains(t))
    throw DomainError("render_tile: tile (" + std::to_string(t.col) + ", " +
                      std::to_string(t.row) + ") outside world region");
  auto rng = tile_rng(spec.seed, t);

  const int base_r = 30 + static_cast<int>(below(rng, 21));
  const int base_g = 40 + static_cast<int>(below(rng, 21));
  const int base_b = 25 + static_cast<int>(below(rng, 21));
  const int amplitude = static_cast<int>(std::lround(spec.noise_level * 35.0));

  TileImage img;
  auto px = img.pixels();
  const std::size_t n = px.size() / 3;
  for (std::size_t i = 0; i < n; i += 8) {
    std::uint64_t bits = rng();
    for (std::size_t k = 0; k < 8 && i + k < n; ++k, bits >>= 8) {
      const int noise = amplitude == 0 ? 0 : static_cast<int>(bits & 0xFF) % (amplitude + 1);
      auto* p = &px[(i + k) * 3];
      p[0] = static_cast<std::uint8_t>(base_r + noise);
      p[1] = static_cast<std::uint8_t>(base_g + noise);
      p[2] = static_cast<std::uint8_t>(base_b + noise);
    }
  }

  int discs = 0;
  for (const auto& f : spec.facilities) {
    const auto tiles = footprint(f);
    if (std::find(tiles.begin(), tiles.end(), t) == tiles.end()) continue;
    const int per_tile = (f.tank_count + f.footprint_tiles - 1) / f.footprint_tiles;
    discs = std::max({discs, kMinDiscsPerTile, per_tile});
  }
  if (discs > 0) {
    constexpr int kPerRow = geo::kTilePixels / kDiscCellPx;
    std::vector<int> cells(kDiscCells);
    for (int i = 0; i < kDiscCells; ++i) cells[i] = i;
    discs = std::min(discs, kDiscCells);
    for (int i = 0; i < discs; ++i) {
      const auto j = i + static_cast<int>(below(rng, static_cast<std::uint64_t>(kDiscCells - i)));
      std::swap(cells[i], cells[j]);
      const int cx = (cells[i] % kPerRow) * kDiscCellPx + kDiscCellPx / 2 - 1 + static_cast<int>(below(rng, 3));
      const int cy = (cells[i] / kPerRow) * kDiscCellPx + kDiscCellPx / 2 - 1 + static_cast<int>(below(rng, 3));
      draw_disc(img, cx, cy);
    }
  }
  return img;
}

std::vector<ExpectedDetection> ground_truth(const WorldSpec& spec) {
  std::unordered_map<geo::TileIndex, std::size_t, geo::TileIndexHash> owner;
  std::set<geo::TileIndex> tiles;
  for (std::size_t i = 0; i < spec.facilities.size(); ++i)
    for (const auto& t : footprint(spec.facilities[i])) {
      tiles.insert(t);
      owner.emplace(t, i);
    }

  std::vector<ExpectedDetection> out;
  std::set<geo::TileIndex> seen;
  for (const auto& start : tiles) {
    if (seen.contains(start)) continue;
    ExpectedDetection e;
    std::set<std::size_t> facilities;
    std::deque<geo::TileIndex> queue{start};
    seen.insert(start);
    while (!queue.empty()) {
      const auto t = queue.front();
      queue.pop_front();
      e.tiles.push_back(t);
      facilities.insert(owner.at(t));
      for (const geo::TileIndex n : {geo::TileIndex{t.col + 1, t.row}, geo::TileIndex{t.col - 1, t.row},
                                     geo::TileIndex{t.col, t.row + 1}, geo::TileIndex{t.col, t.row - 1}})
        if (tiles.contains(n) && seen.insert(n).second) queue.push_back(n);
    }
    std::sort(e.tiles.begin(), e.tiles.end());
    e.center = spec.facilities[*facilities.begin()].center;
    for (auto i : facilities) e.tank_count += spec.facilities[i].tank_count;
    out.push_back(std::move(e));
  }
  return out;
}

WorldSpec generate_world(const geo::BoundingRegion& region, std::uint64_t seed, int count,
                         double noise_level) {
  if (count < 0) throw ValidationError("facility count must be >= 0");
  const auto range = geo::tile_range(region);
  // Edge tiles are only partly inside the region, so cells start one tile in.
  const int cells_x = (range.max_col - range.min_col - 1) / kCellTiles;
  const int cells_y = (range.max_row - range.min_row - 1) / kCellTiles;
  const int available = std::max(0, cells_x) * std::max(0, cells_y);
  if (count > available)
    throw ValidationError("region fits at most " + std::to_string(available) + " facilities, asked for " +
                          std::to_string(count));

  std::mt19937_64 rng(splitmix64(seed ^ 0x5EEDF00Dull));
  std::vector<int> cells(static_cast<std::size_t>(available));
  for (int i = 0; i < available; ++i) cells[i] = i;

  WorldSpec spec{region, seed, {}, noise_level};
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(below(rng, static_cast<std::uint64_t>(available - i)));
    std::swap(cells[i], cells[j]);
    const int cell_col = range.min_col + 1 + (cells[i] % cells_x) * kCellTiles;
    const int cell_row = range.min_row + 1 + (cells[i] / cells_x) * kCellTiles;
    // Centers fall in the middle 1.5 tiles of a 6-tile cell: neighbors are
    // at least 4.5 tile sides apart and footprints stay inside the cell.
    const double x = (cell_col + 2.25 + 1.5 * unit(rng)) * geo::kTileSideM;
    const double y = (cell_row + 2.25 + 1.5 * unit(rng)) * geo::kTileSideM;
    PlantedFacility f;
    f.center = geo::unproject({x, y});
    f.footprint_tiles = 1 + static_cast<int>(below(rng, 4));
    f.tank_count = 5 + static_cast<int>(below(rng, 56));
    spec.facilities.push_back(f);
  }
  std::sort(spec.facilities.begin(), spec.facilities.end(), [](const auto& a, const auto& b) {
    return geo::tile_of(a.center) < geo::tile_of(b.center);
  });
  validate(spec);
  return spec;
}

nlohmann::ordered_json to_json(const WorldSpec& spec) {
  auto facilities = nlohmann::ordered_json::array();
  for (const auto& f : spec.facilities)
    facilities.push_back({{"lat", f.center.lat()},
                          {"lon", f.center.lon()},
                          {"tank_count", f.tank_count},
                          {"footprint_tiles", f.footprint_tiles}});
  return {{"region", pipeline::region_to_json(spec.region)},
          {"seed", spec.seed},
          {"noise_level", spec.noise_level},
          {"facilities", std::move(facilities)}};
}

WorldSpec world_from_json(const nlohmann::json& j) {
  try {
    WorldSpec spec{pipeline::region_from_json(j.at("region")), j.at("seed").get<std::uint64_t>(),
                   {}, j.value("noise_level", 0.5)};
    for (const auto& f : j.at("facilities"))
      spec.facilities.push_back({geo::GeoPoint(f.at("lat").get<double>(), f.at("lon").get<double>()),
                                 f.at("tank_count").get<int>(), f.value("footprint_tiles", 1)});
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("world spec: ") + e.what());
  }
}

void write_world(const std::filesystem::path& path, const WorldSpec& spec) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(spec).dump(2) << '\n';
}

WorldSpec read_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return world_from_json(j);
}

SyntheticImageSource::SyntheticImageSource(WorldSpec spec)
    : spec_(std::move(spec)), range_(geo::tile_range(spec_.region)) {
  validate(spec_);
}

bool SyntheticImageSource::has(const geo::TileIndex& t) const { return range_.contains(t); }

TileImage SyntheticImageSource::fetch(const geo::TileIndex& t) const { return render_tile(spec_, t); }

}  // namespace facmap::synthworld
