#include <doctest.h>

#include <set>

#include "facmap/errors.hpp"
#include "facmap/pipeline.hpp"
#include "facmap/protocol.hpp"
#include "facmap/synthworld.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace facmap;
using namespace facmap::pipeline;
using geo::TileIndex;

namespace {

std::vector<scoring::TileScore> grid_scores(oracle::Gen& g, int w, int h, double density) {
  std::vector<scoring::TileScore> out;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.push_back({{c, r}, g.coin(density) ? g.uniform(0.5, 1.0) : g.uniform(0.0, 0.5)});
  return out;
}

void check_against_bfs(const TileSet& positive, const ScoreLookup& lookup, Adjacency adj) {
  const auto dets = merge_positive_tiles(positive, lookup, adj);
  const std::set<TileIndex> as_set(positive.begin(), positive.end());
  const auto comps = oracle::bfs_components(as_set, adj == Adjacency::eight);
  REQUIRE(dets.size() == comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    std::vector<TileIndex> members;
    for (const auto& m : dets[i].members) members.push_back(m.tile);
    REQUIRE(members == comps[i]);
    REQUIRE(dets[i].id == detection_id(comps[i].front()));
  }
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("apply_threshold") {
  const std::vector<scoring::TileScore> s{{{0, 0}, 0.0}, {{1, 0}, 0.5}, {{2, 0}, 1.0}, {{3, 0}, 0.4999999}};
  CHECK(apply_threshold(s, OperatingPoint(0.0)).size() == 4);
  CHECK(apply_threshold(s, OperatingPoint(1.0)) == TileSet{{2, 0}});
  CHECK(apply_threshold(s, OperatingPoint(0.5)) == TileSet{{1, 0}, {2, 0}});
  CHECK_THROWS_AS(OperatingPoint(1.01), ValidationError);
  CHECK_THROWS_AS(OperatingPoint(-0.01), ValidationError);

  oracle::Gen g(31);
  for (int i = 0; i < 100; ++i) {
    const auto scores = grid_scores(g, 20, 20, 0.3);
    const double tau = g.coarse_probability();
    TileSet expect;
    for (const auto& t : scores)
      if (t.probability >= tau) expect.insert(t.tile);
    REQUIRE(apply_threshold(scores, OperatingPoint(tau)) == expect);
  }
}

TEST_CASE("merge examples") {
  const ScoreLookup lookup{{{0, 0}, 0.9}, {{0, 1}, 0.7}, {{5, 5}, 0.8}, {{1, 1}, 0.6}};
  SUBCASE("singleton") {
    const auto d = merge_positive_tiles({{0, 0}}, lookup);
    REQUIRE(d.size() == 1);
    CHECK(d[0].centroid == geo::tile_centroid({0, 0}));
    CHECK(d[0].id == "det_0_0");
    CHECK(d[0].max_probability == 0.9);
  }
  SUBCASE("two components") {
    const auto d = merge_positive_tiles({{0, 0}, {0, 1}, {5, 5}}, lookup);
    REQUIRE(d.size() == 2);
    CHECK(d[0].tile_count() == 2);
    CHECK(d[1].tile_count() == 1);
    CHECK(d[0].max_probability == 0.9);
    CHECK(d[0].mean_probability == doctest::Approx(0.8));
    const auto mid = geo::unproject({625.0, 1250.0});
    CHECK(d[0].centroid.lat() == doctest::Approx(mid.lat()).epsilon(1e-12));
    CHECK(d[0].centroid.lon() == doctest::Approx(mid.lon()).epsilon(1e-12));
  }
  SUBCASE("diagonals only join under eight-adjacency") {
    CHECK(merge_positive_tiles({{0, 0}, {1, 1}}, lookup).size() == 2);
    CHECK(merge_positive_tiles({{0, 0}, {1, 1}}, lookup, Adjacency::eight).size() == 1);
  }
  SUBCASE("positive tile without a score") {
    CHECK_THROWS_AS(merge_positive_tiles({{7, 7}}, lookup), ValidationError);
  }
  CHECK(parse_adjacency("8") == Adjacency::eight);
  CHECK(parse_adjacency("4") == Adjacency::four);
  CHECK_THROWS_AS(parse_adjacency("6"), ValidationError);
}

TEST_CASE("merge equals BFS components on random grids") {
  oracle::Gen g(32);
  for (int trial = 0; trial < 120; ++trial) {
    const int w = g.integer(1, 60), h = g.integer(1, 60);
    const double density = g.uniform(0.05, 0.5);
    const auto scores = grid_scores(g, w, h, density);
    const auto positive = apply_threshold(scores, OperatingPoint(0.5));
    const auto lookup = make_lookup(scores);
    check_against_bfs(positive, lookup, Adjacency::four);
    check_against_bfs(positive, lookup, Adjacency::eight);
    const auto dets = merge_positive_tiles(positive, lookup);
    std::size_t total = 0;
    for (const auto& d : dets) {
      total += d.tile_count();
      REQUIRE(d.max_probability >= d.mean_probability);
      REQUIRE(d.mean_probability >= 0.5);
    }
    REQUIRE(total == positive.size());
    REQUIRE(dets.size() <= positive.size());
  }
}

TEST_CASE("filter_exclusions") {
  std::vector<Detection> dets;
  for (int i = 0; i < 10; ++i) dets.push_back(testing::single_tile_detection(geo::GeoPoint(30.0 + i * 0.1, -95.0), 0.9));
  SUBCASE("no zones is the identity") {
    const auto r = filter_exclusions(dets, {});
    CHECK(r.kept.size() == dets.size());
    CHECK(r.removed_per_zone.empty());
  }
  SUBCASE("zone covering everything") {
    const std::vector<ExclusionZone> zones{{geo::BoundingRegion(29, -96, 32, -94), "all"}};
    const auto r = filter_exclusions(dets, zones);
    CHECK(r.kept.empty());
    CHECK(r.removed_per_zone == std::vector<std::size_t>{10});
  }
  SUBCASE("overlapping zones charge the first") {
    const std::vector<ExclusionZone> zones{{geo::BoundingRegion(30.15, -96, 30.45, -94), "a"},
                                           {geo::BoundingRegion(30.25, -96, 30.65, -94), "b"}};
    const auto r = filter_exclusions(dets, zones);
    CHECK(r.removed_per_zone[0] + r.removed_per_zone[1] == dets.size() - r.kept.size());
    for (const auto& d : r.kept) CHECK_FALSE(zones[0].region.contains(d.centroid));
  }
  SUBCASE("random zones equal the containment scan") {
    oracle::Gen g(33);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<ExclusionZone> zones;
      for (int k = g.integer(0, 3); k > 0; --k) {
        const double lat = g.uniform(29.8, 31.0), lon = g.uniform(-95.3, -94.9);
        zones.push_back({geo::BoundingRegion(lat, lon, lat + g.uniform(0.01, 0.5), lon + g.uniform(0.01, 0.3)), "z"});
      }
      std::vector<std::string> expect;
      std::vector<std::size_t> removed(zones.size(), 0);
      for (const auto& d : dets) {
        bool drop = false;
        for (std::size_t z = 0; z < zones.size() && !drop; ++z)
          if (zones[z].region.contains(d.centroid)) {
            ++removed[z];
            drop = true;
          }
        if (!drop) expect.push_back(d.id);
      }
      const auto r = filter_exclusions(dets, zones);
      std::vector<std::string> got;
      for (const auto& d : r.kept) got.push_back(d.id);
      REQUIRE(got == expect);
      REQUIRE(r.removed_per_zone == removed);
    }
  }
}

TEST_CASE("run_deployment on a synthetic world") {
  const geo::BoundingRegion region(29.0, -95.3, 29.12, -95.0);
  const auto spec = synthworld::generate_world(region, 5, 4);
  const synthworld::SyntheticImageSource source(spec);
  const scoring::HeuristicScorer scorer;
  DeploymentConfig config;
  config.workers = 1;
  const auto a = run_deployment(region, source, scorer, config);
  const auto truth = synthworld::ground_truth(spec);
  REQUIRE(a.detections.size() == truth.size());
  CHECK(a.detections.size() == 4);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::vector<TileIndex> members;
    for (const auto& m : a.detections[i].members) members.push_back(m.tile);
    CHECK(members == truth[i].tiles);
    const auto c = geo::project(a.detections[i].centroid), p = geo::project(truth[i].center);
    CHECK(std::hypot(c.x - p.x, c.y - p.y) <= 1250.0);
  }
  CHECK(a.manifest.tile_count == geo::enumerate_tiles(region).size());
  CHECK(a.manifest.detection_count == 4);

  config.workers = 3;
  const auto b = run_deployment(region, source, scorer, config);
  CHECK(detections_to_geojson(a.detections).dump() == detections_to_geojson(b.detections).dump());
  CHECK(a.manifest.to_json(false).dump() == b.manifest.to_json(false).dump());
  CHECK(a.scores == b.scores);

  SUBCASE("empty terrain") {
    synthworld::WorldSpec empty = spec;
    empty.facilities.clear();
    const auto r = run_deployment(region, synthworld::SyntheticImageSource(empty), scorer, config);
    CHECK(r.detections.empty());
    CHECK(r.manifest.positive_count == 0);
  }
  SUBCASE("scores-only path agrees") {
    const auto c = detect_from_scores(a.scores, config, region);
    CHECK(detections_to_geojson(c.detections).dump() == detections_to_geojson(a.detections).dump());
  }
  SUBCASE("exclusion summary in the manifest") {
    DeploymentConfig cfg = config;
    cfg.zones.push_back({geo::BoundingRegion(a.detections[0].centroid.lat() - 0.001, a.detections[0].centroid.lon() - 0.001,
                                             a.detections[0].centroid.lat() + 0.001, a.detections[0].centroid.lon() + 0.001),
                         "flare stacks"});
    const auto r = detect_from_scores(a.scores, cfg, region);
    CHECK(r.detections.size() == 3);
    const auto j = r.manifest.to_json();
    CHECK(j["exclusions"][0]["removed"] == 1);
    CHECK(j["exclusions"][0]["reason"] == "flare stacks");
    CHECK(j["detection_count"] == 3);
    CHECK(j.contains("wall_time_s"));
    CHECK_FALSE(r.manifest.to_json(false).contains("wall_time_s"));
  }
}

TEST_CASE("missing imagery aborts with the list of gaps") {
  testing::TempDir dir;
  const auto a = geo::unproject({10, 10}), b = geo::unproject({3740, 1240});
  const geo::BoundingRegion region(a.lat(), a.lon(), b.lat(), b.lon());  // tiles (0..2, 0)
  png::write_tile(dir / "0_0.png", TileImage());
  png::write_tile(dir / "2_0.png", TileImage());
  const protocol::DirectoryImageSource source(dir.path());
  try {
    run_deployment(region, source, scoring::HeuristicScorer{}, DeploymentConfig{});
    FAIL("expected MissingImageryError");
  } catch (const MissingImageryError& e) {
    CHECK(e.missing() == std::vector<TileIndex>{{1, 0}});
    CHECK(std::string(e.what()).find("1_0") != std::string::npos);
  }
}

TEST_CASE("detections export formats") {
  const ScoreLookup lookup{{{0, 0}, 0.9}, {{1, 0}, 0.7}, {{5, 5}, 0.8}};
  const auto dets = merge_positive_tiles({{0, 0}, {1, 0}, {5, 5}}, lookup);
  testing::TempDir dir;
  write_detections_geojson(dir / "d.geojson", dets);
  write_detections_csv(dir / "d.csv", dets);
  const auto back = read_detections_geojson(dir / "d.geojson");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == dets[0].id);
  CHECK(back[0].members == dets[0].members);
  CHECK(back[0].centroid == dets[0].centroid);
  const auto j = detections_to_geojson(dets);
  CHECK(j["type"] == "FeatureCollection");
  const auto& props = j["features"][0]["properties"];
  for (const char* key : {"id", "max_probability", "mean_probability", "tile_count"}) CHECK(props.contains(key));
  CHECK(j["features"][0]["geometry"]["type"] == "Point");
  const auto csv_text = testing::read_text(dir / "d.csv");
  CHECK(csv_text.rfind("id,lat,lon,max_probability,mean_probability,tile_count\n", 0) == 0);
  CHECK(csv_text.find("det_0_0,") != std::string::npos);
}

TEST_CASE("region parsing") {
  const auto r = parse_region("29.5,-95.5,30,-95");
  CHECK(r.min_lat() == 29.5);
  CHECK(r.max_lon() == -95.0);
  CHECK_THROWS_AS(parse_region("1,2,3"), ValidationError);
  CHECK_THROWS_AS(parse_region("3,2,1,4"), ValidationError);
  CHECK_THROWS_AS(parse_region("a,b,c,d"), ValidationError);
}

}  // TEST_SUITE
