#include <doctest.h>

#include <sstream>

#include "facmap/benchmark.hpp"
#include "facmap/cli.hpp"
#include "facmap/csv.hpp"
#include "facmap/evaluation.hpp"
#include "facmap/pipeline.hpp"
#include "facmap/store.hpp"
#include "fixtures.hpp"

using namespace facmap;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run facmap_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "facmap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const std::string kRegion = "29.0,-95.4,29.12,-95.0";

json manifest_without_wall_time(const std::filesystem::path& p) {
  auto j = json::parse(testing::read_text(p));
  j.erase("wall_time_s");
  return j;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("every subcommand documents its flags") {
  const std::map<std::string, std::vector<std::string>> flags{
      {"synth", {"--seed", "--facilities", "--region", "--noise", "--out", "--render", "--workers"}},
      {"grid", {"--region", "--out"}},
      {"score", {"--world", "--tiles", "--out", "--workers"}},
      {"detect", {"--world", "--tiles", "--region", "--scores", "--threshold", "--adjacency", "--exclude", "--workers", "--out"}},
      {"metrics", {"--scores", "--threshold", "--split", "--out"}},
      {"select-threshold", {"--scores", "--split", "--out"}},
      {"match", {"--datasets", "--radius", "--out"}},
      {"report", {"--datasets", "--verified", "--detections", "--log", "--training", "--dedup-radius", "--coverage-radius", "--out"}},
      {"serve", {"--host", "--port", "--detections", "--log", "--tiles", "--world", "--feature-maps", "--weights", "--datasets", "--training", "--static"}},
  };
  const auto top = facmap_cli({"--help"});
  CHECK(top.code == 0);
  CHECK(top.out.find("--config") != std::string::npos);
  for (const auto& [sub, expected] : flags) {
    CAPTURE(sub);
    CHECK(top.out.find(sub) != std::string::npos);
    const auto r = facmap_cli({sub, "--help"});
    CHECK(r.code == 0);
    for (const auto& f : expected) {
      CAPTURE(f);
      CHECK(r.out.find(f + " ") != std::string::npos);
    }
    // And nothing undocumented: every "--flag" in the help is in the list.
    std::istringstream lines(r.out);
    std::string line;
    while (std::getline(lines, line)) {
      const auto pos = line.find("--");
      if (pos == std::string::npos || line.find("--help") != std::string::npos) continue;
      const auto end = line.find_first_of(" ,", pos);
      const auto flag = line.substr(pos, end - pos);
      CAPTURE(flag);
      CHECK(std::find(expected.begin(), expected.end(), flag) != expected.end());
    }
  }
}

TEST_CASE("exit codes") {
  testing::TempDir dir;
  CHECK(facmap_cli({"detect", "--bogus"}).code == 2);
  CHECK(facmap_cli({}).code == 2);
  CHECK(facmap_cli({"synth", "--out", (dir / "w").string(), "--seed", "x"}).code == 2);
  const auto missing = facmap_cli({"detect", "--world", (dir / "absent").string(), "--out", (dir / "o").string()});
  CHECK(missing.code == 66);
  CHECK(missing.err.find("absent") != std::string::npos);
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);
  CHECK(facmap_cli({"metrics", "--scores", (dir / "none.csv").string(), "--threshold", "0.5"}).code == 66);
  CHECK(facmap_cli({"--config", (dir / "none.json").string(), "grid", "--region", kRegion, "--out", (dir / "g.csv").string()}).code == 66);
  CHECK(facmap_cli({"grid", "--region", "30,0,29,1", "--out", (dir / "g.csv").string()}).code == 65);
  CHECK(facmap_cli({"synth", "--region", kRegion, "--facilities", "500", "--out", (dir / "w").string()}).code == 65);
  CHECK(facmap_cli({"detect", "--out", (dir / "o").string()}).code == 65);
  testing::write_text(dir / "scores.csv", "col,row,probability\n1,1,2.0\n");
  CHECK(facmap_cli({"detect", "--scores", (dir / "scores.csv").string(), "--out", (dir / "o").string()}).code == 65);
  CHECK(facmap_cli({"detect", "--scores", (dir / "scores.csv").string(), "--threshold", "1.5", "--out", (dir / "o").string()}).code == 65);
}

TEST_CASE("synth then detect recovers every planted facility, deterministically") {
  testing::TempDir dir;
  const auto world = (dir / "world").string();
  const auto a = facmap_cli({"synth", "--seed", "7", "--facilities", "5", "--region", kRegion, "--out", world});
  REQUIRE(a.code == 0);
  const auto world_text = testing::read_text(dir / "world" / "world.json");
  REQUIRE(facmap_cli({"synth", "--seed", "7", "--facilities", "5", "--region", kRegion, "--out", (dir / "world2").string()}).code == 0);
  CHECK(testing::read_text(dir / "world2" / "world.json") == world_text);

  REQUIRE(facmap_cli({"detect", "--world", world, "--threshold", "0.5", "--workers", "1", "--out", (dir / "d1").string()}).code == 0);
  REQUIRE(facmap_cli({"detect", "--world", world, "--threshold", "0.5", "--workers", "2", "--out", (dir / "d2").string()}).code == 0);
  const auto gj = json::parse(testing::read_text(dir / "d1" / "detections.geojson"));
  CHECK(gj["features"].size() == 5);
  CHECK(testing::read_text(dir / "d1" / "detections.geojson") == testing::read_text(dir / "d2" / "detections.geojson"));
  CHECK(testing::read_text(dir / "d1" / "detections.csv") == testing::read_text(dir / "d2" / "detections.csv"));
  const auto m1 = manifest_without_wall_time(dir / "d1" / "manifest.json");
  CHECK(m1 == manifest_without_wall_time(dir / "d2" / "manifest.json"));
  CHECK(m1["detection_count"] == 5);
  for (const char* key : {"region", "tile_count", "positive_count", "detection_count", "threshold", "adjacency", "exclusions"})
    CHECK(m1.contains(key));

  SUBCASE("rendered tiles scored externally give the same detections") {
    REQUIRE(facmap_cli({"synth", "--seed", "7", "--facilities", "5", "--region", kRegion, "--render", "--out", (dir / "r").string()}).code == 0);
    REQUIRE(facmap_cli({"score", "--tiles", (dir / "r" / "tiles").string(), "--out", (dir / "scores.csv").string()}).code == 0);
    REQUIRE(facmap_cli({"score", "--world", world, "--out", (dir / "scores_world.csv").string()}).code == 0);
    CHECK(testing::read_text(dir / "scores.csv") == testing::read_text(dir / "scores_world.csv"));
    REQUIRE(facmap_cli({"detect", "--scores", (dir / "scores.csv").string(), "--region", kRegion, "--out", (dir / "d3").string()}).code == 0);
    CHECK(testing::read_text(dir / "d3" / "detections.geojson") == testing::read_text(dir / "d1" / "detections.geojson"));
    REQUIRE(facmap_cli({"detect", "--tiles", (dir / "r" / "tiles").string(), "--region", kRegion, "--out", (dir / "d4").string()}).code == 0);
    CHECK(testing::read_text(dir / "d4" / "detections.geojson") == testing::read_text(dir / "d1" / "detections.geojson"));

    // Remove one tile: the deployment refuses to run and names it.
    const auto victim = pipeline::read_detections_geojson(dir / "d1" / "detections.geojson")[0].members[0].tile;
    std::filesystem::remove(dir / "r" / "tiles" / (std::to_string(victim.col) + "_" + std::to_string(victim.row) + ".png"));
    const auto gap = facmap_cli({"detect", "--tiles", (dir / "r" / "tiles").string(), "--region", kRegion, "--out", (dir / "d5").string()});
    CHECK(gap.code == 66);
    CHECK(gap.err.find(std::to_string(victim.col) + "_" + std::to_string(victim.row)) != std::string::npos);
  }
  SUBCASE("config file values with flag overrides") {
    testing::write_text(dir / "cfg.json", R"({"detect": {"threshold": 0.99, "adjacency": "8", "workers": 1}})");
    REQUIRE(facmap_cli({"--config", (dir / "cfg.json").string(), "detect", "--world", world, "--out", (dir / "c1").string()}).code == 0);
    const auto m = manifest_without_wall_time(dir / "c1" / "manifest.json");
    CHECK(m["threshold"] == 0.99);
    CHECK(m["adjacency"] == "8");
    CHECK(m["detection_count"] == 0);
    REQUIRE(facmap_cli({"--config", (dir / "cfg.json").string(), "detect", "--world", world, "--threshold", "0.5", "--out", (dir / "c2").string()}).code == 0);
    const auto m2 = manifest_without_wall_time(dir / "c2" / "manifest.json");
    CHECK(m2["threshold"] == 0.5);
    CHECK(m2["adjacency"] == "8");
    CHECK(m2["detection_count"] == 5);
    testing::write_text(dir / "broken.json", "{nope");
    CHECK(facmap_cli({"--config", (dir / "broken.json").string(), "detect", "--world", world, "--out", (dir / "c3").string()}).code == 2);
  }
  SUBCASE("exclusion zones") {
    const auto d = pipeline::read_detections_geojson(dir / "d1" / "detections.geojson")[0].centroid;
    json zones = json::array({{{"region", {{"min_lat", d.lat() - 0.01}, {"min_lon", d.lon() - 0.01}, {"max_lat", d.lat() + 0.01}, {"max_lon", d.lon() + 0.01}}},
                               {"reason", "gas flares"}}});
    testing::write_text(dir / "zones.json", zones.dump());
    REQUIRE(facmap_cli({"detect", "--world", world, "--exclude", (dir / "zones.json").string(), "--out", (dir / "x").string()}).code == 0);
    const auto m = manifest_without_wall_time(dir / "x" / "manifest.json");
    CHECK(m["detection_count"] == 4);
    CHECK(m["exclusions"][0]["removed"] == 1);
  }
}

TEST_CASE("grid") {
  testing::TempDir dir;
  const auto r = facmap_cli({"grid", "--region", kRegion, "--out", (dir / "grid.csv").string()});
  REQUIRE(r.code == 0);
  const auto n = geo::enumerate_tiles(pipeline::parse_region(kRegion)).size();
  const auto text = testing::read_text(dir / "grid.csv");
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == n + 1);
  CHECK(text.rfind("col,row,lat,lon\n", 0) == 0);
}

TEST_CASE("metrics and select-threshold") {
  testing::TempDir dir;
  const auto fixture = testing::split_fixture();
  evaluation::write_labeled_scores(dir / "test.csv", evaluation::filter_split(fixture, evaluation::Split::test));
  const auto r = facmap_cli({"metrics", "--scores", (dir / "test.csv").string(), "--threshold", "0.5", "--out", (dir / "m.json").string()});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["precision"] == 0.75);
  CHECK(j["recall"] == 1.0);
  CHECK(j == json::parse(testing::read_text(dir / "m.json")));

  evaluation::write_labeled_scores(dir / "all.csv", fixture);
  const auto by_split = facmap_cli({"metrics", "--scores", (dir / "all.csv").string(), "--threshold", "0.5", "--split", "test"});
  CHECK(json::parse(by_split.out)["confusion"]["tn"] == 694);

  testing::write_text(dir / "sep.csv",
                      "id,split,label,probability,negative_category\n"
                      "a,validation,positive,0.83,\nb,validation,positive,0.71,\nc,validation,negative,0.4,urban\n"
                      "d,validation,negative,0.69,forest\ne,test,negative,0.99,snow\n");
  const auto s = facmap_cli({"select-threshold", "--scores", (dir / "sep.csv").string()});
  REQUIRE(s.code == 0);
  CHECK(json::parse(s.out)["threshold"] == 0.71);
  CHECK(json::parse(s.out)["precision"] == 1.0);
  const auto all = facmap_cli({"select-threshold", "--scores", (dir / "sep.csv").string(), "--split", "all"});
  CHECK(json::parse(all.out)["precision"] == doctest::Approx(2.0 / 3.0));
  testing::write_text(dir / "nopos.csv", "id,split,label,probability,negative_category\nc,validation,negative,0.4,\n");
  CHECK(facmap_cli({"select-threshold", "--scores", (dir / "nopos.csv").string()}).code == 65);
}

TEST_CASE("match and report on the benchmark fixture") {
  const auto& fx = testing::benchmark_fixture();
  testing::TempDir dir;
  // Split records across two source files.
  const auto half = fx.records.size() / 2;
  benchmark::write_records_csv(dir / "a.csv", std::vector(fx.records.begin(), fx.records.begin() + half));
  benchmark::write_records_csv(dir / "b.csv", std::vector(fx.records.begin() + half, fx.records.end()));
  const auto m = facmap_cli({"match", "--datasets", (dir / "a.csv").string(), (dir / "b.csv").string(), "--out", (dir / "combined.geojson").string()});
  REQUIRE(m.code == 0);
  CHECK(m.out.find("oil_refinery: 147") != std::string::npos);
  CHECK(m.out.find("petroleum_terminal: 1222") != std::string::npos);

  std::string training = "lat,lon\n";
  for (const auto& p : fx.training) training += csv::format_double(p.lat()) + "," + csv::format_double(p.lon()) + "\n";
  testing::write_text(dir / "training.csv", training);
  const std::string expected =
      "metric,oil_refinery,petroleum_terminal\n"
      "total_detections,114,336\n"
      "coverage,73.5% (108/147),23.9% (292/1222)\n"
      "new_detections,6,142\n";

  // From an exported verified-facilities file.
  std::vector<store::ReviewedDetection> verified;
  for (std::size_t i = 0; i < fx.detections.size(); ++i) {
    store::ReviewedDetection r;
    r.detection = fx.detections[i];
    r.status = store::ReviewStatus::confirmed;
    r.facility_type = fx.kinds[i];
    verified.push_back(r);
  }
  testing::write_text(dir / "verified.geojson", store::verified_to_geojson(verified).dump());
  const auto r1 = facmap_cli({"report", "--datasets", (dir / "a.csv").string(), (dir / "b.csv").string(), "--verified",
                              (dir / "verified.geojson").string(), "--training", (dir / "training.csv").string(), "--out",
                              (dir / "rep1").string()});
  REQUIRE(r1.code == 0);
  CHECK(testing::read_text(dir / "rep1" / "table1.csv") == expected);
  CHECK(r1.out == expected);

  // From detections plus the review log.
  pipeline::write_detections_geojson(dir / "detections.geojson", fx.all_detections());
  {
    store::DetectionStore s(dir / "events.ndjson");
    s.ingest(fx.all_detections());
    for (const auto& e : fx.review_events()) s.apply_review(e);
  }
  const auto r2 = facmap_cli({"report", "--datasets", (dir / "a.csv").string(), (dir / "b.csv").string(), "--detections",
                              (dir / "detections.geojson").string(), "--log", (dir / "events.ndjson").string(), "--training",
                              (dir / "training.csv").string(), "--out", (dir / "rep2").string()});
  REQUIRE(r2.code == 0);
  CHECK(testing::read_text(dir / "rep2" / "table1.csv") == expected);
  CHECK(testing::read_text(dir / "rep2" / "table1.json") == testing::read_text(dir / "rep1" / "table1.json"));

  CHECK(facmap_cli({"report", "--datasets", (dir / "a.csv").string(), "--out", (dir / "rep3").string()}).code == 65);
}

}  // TEST_SUITE
