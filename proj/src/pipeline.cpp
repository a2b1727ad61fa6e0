#include "facmap/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <sstream>

#include "facmap/csv.hpp"
#include "facmap/parallel.hpp"
#include "facmap/union_find.hpp"

namespace facmap::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

OperatingPoint::OperatingPoint(double threshold) : threshold_(threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ValidationError("threshold " + std::to_string(threshold) + " outside [0, 1]");
}

std::string to_string(Adjacency a) { return a == Adjacency::four ? "4" : "8"; }

Adjacency parse_adjacency(const std::string& text) {
  if (text == "4" || text == "four") return Adjacency::four;
  if (text == "8" || text == "eight") return Adjacency::eight;
  throw ValidationError("adjacency must be 4 or 8, got '" + text + "'");
}

const scoring::TileScore& Detection::best_member() const {
  return *std::max_element(members.begin(), members.end(), [](const auto& a, const auto& b) {
    return a.probability < b.probability;
  });
}

std::string detection_id(const geo::TileIndex& anchor) {
  return "det_" + std::to_string(anchor.col) + "_" + std::to_string(anchor.row);
}

Detection make_detection(std::vector<scoring::TileScore> members) {
  if (members.empty()) throw ValidationError("detection needs at least one member tile");
  std::sort(members.begin(), members.end(),
            [](const auto& a, const auto& b) { return a.tile < b.tile; });
  double sx = 0.0, sy = 0.0, sp = 0.0, mx = 0.0;
  for (const auto& m : members) {
    const auto c = geo::tile_center_projected(m.tile);
    sx += c.x;
    sy += c.y;
    sp += m.probability;
    mx = std::max(mx, m.probability);
  }
  const auto n = static_cast<double>(members.size());
  Detection d{detection_id(members.front().tile), {}, geo::unproject({sx / n, sy / n}), mx,
              sp / n};
  // The mean of identical values can round above the max by one ulp.
  d.mean_probability = std::min(d.mean_probability, d.max_probability);
  d.members = std::move(members);
  return d;
}

TileSet apply_threshold(std::span<const scoring::TileScore> scores, const OperatingPoint& op) {
  TileSet out;
  for (const auto& s : scores)
    if (s.probability >= op.threshold()) out.insert(s.tile);
  return out;
}

ScoreLookup make_lookup(std::span<const scoring::TileScore> scores) {
  ScoreLookup lookup;
  lookup.reserve(scores.size());
  for (const auto& s : scores) lookup.emplace(s.tile, s.probability);
  return lookup;
}

std::vector<Detection> merge_positive_tiles(const TileSet& positive, const ScoreLookup& scores,
                                            Adjacency adjacency) {
  const std::vector<geo::TileIndex> tiles(positive.begin(), positive.end());
  std::unordered_map<geo::TileIndex, std::size_t, geo::TileIndexHash> slot;
  slot.reserve(tiles.size());
  for (std::size_t i = 0; i < tiles.size(); ++i) slot.emplace(tiles[i], i);

  // Forward half-neighborhood; the backward half is covered from the other side.
  static constexpr std::array<std::array<int, 2>, 2> kForward4{{{1, 0}, {0, 1}}};
  static constexpr std::array<std::array<int, 2>, 4> kForward8{{{1, 0}, {0, 1}, {1, 1}, {-1, 1}}};
  const std::span<const std::array<int, 2>> offsets =
      adjacency == Adjacency::four ? std::span<const std::array<int, 2>>(kForward4)
                                   : std::span<const std::array<int, 2>>(kForward8);

  UnionFind uf(tiles.size());
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    for (const auto& [dc, dr] : offsets) {
      const auto it = slot.find({tiles[i].col + dc, tiles[i].row + dr});
      if (it != slot.end()) uf.unite(i, it->second);
    }
  }

  std::vector<Detection> detections;
  for (const auto& group : uf.groups()) {
    std::vector<scoring::TileScore> members;
    members.reserve(group.size());
    for (auto i : group) {
      const auto it = scores.find(tiles[i]);
      if (it == scores.end())
        throw ValidationError("positive tile (" + std::to_string(tiles[i].col) + ", " +
                              std::to_string(tiles[i].row) + ") has no score");
      members.push_back({tiles[i], it->second});
    }
    detections.push_back(make_detection(std::move(members)));
  }
  // groups() orders by smallest index, i.e. by first member in (row, col) order.
  return detections;
}

FilterResult filter_exclusions(std::vector<Detection> detections,
                               std::span<const ExclusionZone> zones) {
  FilterResult result;
  result.removed_per_zone.assign(zones.size(), 0);
  result.kept.reserve(detections.size());
  for (auto& d : detections) {
    const auto hit = std::find_if(zones.begin(), zones.end(), [&](const ExclusionZone& z) {
      return z.region.contains(d.centroid);
    });
    if (hit == zones.end())
      result.kept.push_back(std::move(d));
    else
      ++result.removed_per_zone[static_cast<std::size_t>(hit - zones.begin())];
  }
  return result;
}

ordered_json RunManifest::to_json(bool include_wall_time) const {
  ordered_json j;
  j["region"] = region ? region_to_json(*region) : ordered_json(nullptr);
  j["tile_count"] = tile_count;
  j["positive_count"] = positive_count;
  j["detection_count"] = detection_count;
  j["threshold"] = threshold;
  j["adjacency"] = pipeline::to_string(adjacency);
  auto ex = ordered_json::array();
  for (const auto& e : exclusions)
    ex.push_back({{"reason", e.reason}, {"region", region_to_json(e.region)}, {"removed", e.removed}});
  j["exclusions"] = std::move(ex);
  if (include_wall_time) j["wall_time_s"] = wall_time_s;
  return j;
}

MissingImageryError::MissingImageryError(std::vector<geo::TileIndex> missing)
    : NotFoundError([&] {
        std::ostringstream msg;
        msg << "imagery missing for " << missing.size() << " tile(s):";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i)
          msg << ' ' << protocol::tile_stem(missing[i]);
        if (missing.size() > 20) msg << " ...";
        return msg.str();
      }()),
      missing_(std::move(missing)) {}

namespace {

void finish(DeploymentResult& result, const DeploymentConfig& config) {
  const auto positive = apply_threshold(result.scores, config.op);
  auto merged = merge_positive_tiles(positive, make_lookup(result.scores), config.adjacency);
  auto filtered = filter_exclusions(std::move(merged), config.zones);

  auto& m = result.manifest;
  m.tile_count = result.scores.size();
  m.positive_count = positive.size();
  m.detection_count = filtered.kept.size();
  m.threshold = config.op.threshold();
  m.adjacency = config.adjacency;
  for (std::size_t i = 0; i < config.zones.size(); ++i)
    m.exclusions.push_back(
        {config.zones[i].reason, config.zones[i].region, filtered.removed_per_zone[i]});
  result.detections = std::move(filtered.kept);
}

}  // namespace

DeploymentResult run_deployment(const geo::BoundingRegion& region,
                                const protocol::ImageSource& images,
                                const scoring::TileScorer& scorer,
                                const DeploymentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto tiles = geo::enumerate_tiles(region);

  std::vector<char> present(tiles.size());
  parallel_for_index(tiles.size(), config.workers,
                     [&](std::size_t i) { present[i] = images.has(tiles[i]) ? 1 : 0; });
  std::vector<geo::TileIndex> missing;
  for (std::size_t i = 0; i < tiles.size(); ++i)
    if (!present[i]) missing.push_back(tiles[i]);
  if (!missing.empty()) throw MissingImageryError(std::move(missing));

  DeploymentResult result;
  result.manifest.region = region;
  result.scores.resize(tiles.size());
  parallel_for_index(tiles.size(), config.workers, [&](std::size_t i) {
    double p = 0.0;
    try {
      p = scorer.score(images.fetch(tiles[i]));
    } catch (const std::exception& e) {
      throw scoring::ScoringError(tiles[i], e.what());
    }
    if (!(p >= 0.0 && p <= 1.0))
      throw scoring::ScoringError(tiles[i], "probability " + std::to_string(p) + " outside [0, 1]");
    result.scores[i] = {tiles[i], p};
  });

  finish(result, config);
  result.manifest.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

DeploymentResult detect_from_scores(std::vector<scoring::TileScore> scores,
                                    const DeploymentConfig& config,
                                    std::optional<geo::BoundingRegion> region) {
  const auto start = std::chrono::steady_clock::now();
  DeploymentResult result;
  result.manifest.region = region;
  std::sort(scores.begin(), scores.end(),
            [](const auto& a, const auto& b) { return a.tile < b.tile; });
  result.scores = std::move(scores);
  finish(result, config);
  result.manifest.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ordered_json region_to_json(const geo::BoundingRegion& r) {
  return {{"min_lat", r.min_lat()}, {"min_lon", r.min_lon()}, {"max_lat", r.max_lat()},
          {"max_lon", r.max_lon()}};
}

geo::BoundingRegion region_from_json(const json& j) {
  try {
    return {j.at("min_lat").get<double>(), j.at("min_lon").get<double>(),
            j.at("max_lat").get<double>(), j.at("max_lon").get<double>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("region: ") + e.what());
  }
}

geo::BoundingRegion parse_region(const std::string& text) {
  const auto parts = csv::split_line(text);
  if (parts.size() != 4)
    throw ValidationError("region must be 'min_lat,min_lon,max_lat,max_lon', got '" + text + "'");
  return {csv::parse_double(parts[0], "min_lat"), csv::parse_double(parts[1], "min_lon"),
          csv::parse_double(parts[2], "max_lat"), csv::parse_double(parts[3], "max_lon")};
}

std::vector<ExclusionZone> read_exclusion_zones(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  const auto& list = doc.is_object() && doc.contains("zones") ? doc.at("zones") : doc;
  if (!list.is_array()) throw ValidationError(path.string() + ": expected an array of zones");
  std::vector<ExclusionZone> zones;
  for (const auto& z : list)
    zones.push_back({region_from_json(z.contains("region") ? z.at("region") : z),
                     z.value("reason", std::string{})});
  return zones;
}

ordered_json detections_to_geojson(std::span<const Detection> detections) {
  auto features = ordered_json::array();
  for (const auto& d : detections) {
    auto tiles = ordered_json::array();
    for (const auto& m : d.members) tiles.push_back({m.tile.col, m.tile.row, m.probability});
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Point"}, {"coordinates", {d.centroid.lon(), d.centroid.lat()}}}},
         {"properties",
          {{"id", d.id},
           {"max_probability", d.max_probability},
           {"mean_probability", d.mean_probability},
           {"tile_count", d.tile_count()},
           {"tiles", std::move(tiles)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

std::vector<Detection> detections_from_geojson(const json& fc) {
  std::vector<Detection> out;
  try {
    if (fc.at("type") != "FeatureCollection")
      throw ValidationError("detections: expected a FeatureCollection");
    for (const auto& f : fc.at("features")) {
      const auto& props = f.at("properties");
      std::vector<scoring::TileScore> members;
      for (const auto& t : props.at("tiles"))
        members.push_back(scoring::make_tile_score(
            {t.at(0).get<std::int32_t>(), t.at(1).get<std::int32_t>()}, t.at(2).get<double>()));
      auto d = make_detection(std::move(members));
      d.id = props.at("id").get<std::string>();
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("detections: ") + e.what());
  }
  return out;
}

void write_detections_geojson(const fs::path& path, std::span<const Detection> detections) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << detections_to_geojson(detections).dump(2) << '\n';
}

void write_detections_csv(const fs::path& path, std::span<const Detection> detections) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,lat,lon,max_probability,mean_probability,tile_count\n";
  for (const auto& d : detections)
    csv::write_row(out, {d.id, csv::format_double(d.centroid.lat()),
                         csv::format_double(d.centroid.lon()), csv::format_double(d.max_probability),
                         csv::format_double(d.mean_probability), std::to_string(d.tile_count())});
}

std::vector<Detection> read_detections_geojson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return detections_from_geojson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace facmap::pipeline
