#include "facmap/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "facmap/benchmark.hpp"
#include "facmap/csv.hpp"
#include "facmap/errors.hpp"
#include "facmap/evaluation.hpp"
#include "facmap/parallel.hpp"
#include "facmap/pipeline.hpp"
#include "facmap/protocol.hpp"
#include "facmap/scoring.hpp"
#include "facmap/service.hpp"
#include "facmap/store.hpp"
#include "facmap/synthworld.hpp"

namespace facmap::cli {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kDefaultRegion = "29.0,-95.6,29.5,-95.0";

/// Reads a JSON object as CLI11 config items. Top-level keys are options of
/// the main app; nested objects are keyed by subcommand name.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j;
    for (const auto* opt : app->get_options({})) {
      if (opt->get_single_name().empty() || opt->get_single_name() == "help") continue;
      if (opt->count() > 0) {
        const auto results = opt->results();
        j[opt->get_single_name()] = results.size() == 1 ? json(results[0]) : json(results);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[opt->get_single_name()] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Paths {
  static fs::path input(const std::string& p, const char* what) {
    if (!fs::exists(p)) throw NotFoundError(std::string(what) + " not found: " + p);
    return p;
  }
};

fs::path world_file(const std::string& p) {
  fs::path path = Paths::input(p, "world");
  if (fs::is_directory(path)) path /= "world.json";
  if (!fs::is_regular_file(path)) throw NotFoundError("world spec not found: " + path.string());
  return path;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

std::optional<evaluation::Split> split_option(const std::string& s) {
  if (s.empty() || s == "all") return std::nullopt;
  return evaluation::parse_split(s);
}

ordered_json ground_truth_geojson(const synthworld::WorldSpec& spec) {
  auto features = ordered_json::array();
  for (const auto& e : synthworld::ground_truth(spec)) {
    auto tiles = ordered_json::array();
    for (const auto& t : e.tiles) tiles.push_back({t.col, t.row});
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Point"}, {"coordinates", {e.center.lon(), e.center.lat()}}}},
         {"properties", {{"tank_count", e.tank_count}, {"tiles", std::move(tiles)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

std::vector<benchmark::FacilityRecord> read_all_records(const std::vector<std::string>& files) {
  std::vector<benchmark::FacilityRecord> records;
  for (const auto& f : files) {
    auto part = benchmark::read_records(Paths::input(f, "dataset"));
    records.insert(records.end(), part.begin(), part.end());
  }
  return records;
}

service::ReviewService* g_running_service = nullptr;

void on_signal(int) {
  if (g_running_service) g_running_service->stop();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Facility detection pipeline: tiling, scoring, merging, evaluation, benchmarking and review."};
  app.name("facmap");
  app.require_subcommand(1, 1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags override its values");

  // synth
  std::uint64_t seed = 0;
  int facilities = 5;
  std::string region_text = kDefaultRegion;
  double noise = 0.5;
  std::string out_path;
  bool render = false;
  unsigned workers = 0;
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic world with planted facilities");
  synth->add_option("--seed", seed, "Random seed")->capture_default_str();
  synth->add_option("--facilities", facilities, "Number of planted facilities")->capture_default_str();
  synth->add_option("--region", region_text, "min_lat,min_lon,max_lat,max_lon")->capture_default_str();
  synth->add_option("--noise", noise, "Terrain noise level in [0, 1]")->capture_default_str();
  synth->add_option("--out", out_path, "Output directory (world.json, ground_truth.geojson, tiles/)")->required();
  synth->add_flag("--render", render, "Also write every tile as {col}_{row}.png plus tiles.csv under tiles/");
  synth->add_option("--workers", workers, "Worker threads (0 = all cores)");

  // grid
  std::string grid_region;
  auto* grid = app.add_subcommand("grid", "Enumerate the tile grid covering a region");
  grid->add_option("--region", grid_region, "min_lat,min_lon,max_lat,max_lon")->required();
  grid->add_option("--out", out_path, "Output CSV (col,row,lat,lon of tile centroids)")->required();

  // score
  std::string world_path, tiles_dir;
  auto* score = app.add_subcommand("score", "Score tiles with the built-in heuristic scorer (scores.csv response)");
  score->add_option("--world", world_path, "Synthetic world directory or world.json");
  score->add_option("--tiles", tiles_dir, "Request directory with tiles.csv and {col}_{row}.png");
  score->add_option("--out", out_path, "Output scores.csv")->required();
  score->add_option("--workers", workers, "Worker threads (0 = all cores)");

  // detect
  std::string scores_path, exclude_path, adjacency_text = "4", detect_region;
  double threshold = 0.5;
  auto* detect = app.add_subcommand("detect", "Run deployment: score, threshold, merge, filter");
  detect->add_option("--world", world_path, "Synthetic world directory or world.json");
  detect->add_option("--tiles", tiles_dir, "Directory of {col}_{row}.png tiles (needs --region)");
  detect->add_option("--region", detect_region, "min_lat,min_lon,max_lat,max_lon (with --tiles or --scores)");
  detect->add_option("--scores", scores_path, "Precomputed scores.csv instead of scoring imagery");
  detect->add_option("--threshold", threshold, "Operating-point threshold (positive when p >= threshold)")
      ->capture_default_str();
  detect->add_option("--adjacency", adjacency_text, "Merge neighborhood: 4 or 8")->capture_default_str();
  detect->add_option("--exclude", exclude_path, "JSON list of exclusion zones {region, reason}");
  detect->add_option("--workers", workers, "Worker threads (0 = all cores)");
  detect->add_option("--out", out_path, "Output directory (detections.geojson, detections.csv, manifest.json)")
      ->required();

  // metrics
  std::string split_text;
  auto* metrics = app.add_subcommand("metrics", "Confusion counts and metrics at a threshold");
  metrics->add_option("--scores", scores_path, "Labeled scores CSV (id,split,label,probability,negative_category)")
      ->required();
  metrics->add_option("--threshold", threshold, "Decision threshold")->required();
  metrics->add_option("--split", split_text, "Restrict to train, validation or test (default: all rows)");
  metrics->add_option("--out", out_path, "Also write the JSON report here");

  // select-threshold
  std::string select_split = "validation";
  auto* select = app.add_subcommand("select-threshold", "Highest-precision threshold with recall 1.0");
  select->add_option("--scores", scores_path, "Labeled scores CSV")->required();
  select->add_option("--split", select_split, "Split to select on, or 'all'")->capture_default_str();
  select->add_option("--out", out_path, "Also write the JSON result here");

  // match
  std::vector<std::string> datasets;
  double dedup_radius = benchmark::kDedupRadiusKm;
  auto* match = app.add_subcommand("match", "Combine benchmark datasets, merging records within the dedup radius");
  match->add_option("--datasets", datasets, "Record files (CSV or GeoJSON)")->required();
  match->add_option("--radius", dedup_radius, "Dedup radius, km")->capture_default_str();
  match->add_option("--out", out_path, "Output combined GeoJSON")->required();

  // report
  std::string verified_path, detections_path, log_path, training_path;
  double coverage_radius = benchmark::kCoverageRadiusKm;
  auto* report = app.add_subcommand("report", "Coverage and new-detection report against benchmark datasets");
  report->add_option("--datasets", datasets, "Record files (CSV or GeoJSON)")->required();
  report->add_option("--verified", verified_path, "Confirmed facilities GeoJSON (id, facility_type)");
  report->add_option("--detections", detections_path, "Detections GeoJSON (with --log instead of --verified)");
  report->add_option("--log", log_path, "Review event log (with --detections)");
  report->add_option("--training", training_path, "Training locations CSV (lat,lon)");
  report->add_option("--dedup-radius", dedup_radius, "Dedup radius, km")->capture_default_str();
  report->add_option("--coverage-radius", coverage_radius, "Coverage radius, km")->capture_default_str();
  report->add_option("--out", out_path, "Output directory (table1.csv, table1.json)")->required();

  // serve
  service::ApiConfig api;
  std::string feature_maps, weights, static_dir, serve_world, serve_tiles, serve_datasets;
  auto* serve = app.add_subcommand("serve", "Run the review HTTP API");
  serve->add_option("--host", api.host, "Bind address")->capture_default_str();
  serve->add_option("--port", api.port, "Port")->capture_default_str();
  serve->add_option("--detections", detections_path, "Detections GeoJSON")->required();
  serve->add_option("--log", log_path, "Review event log (created if absent)")->required();
  serve->add_option("--tiles", serve_tiles, "Directory of {col}_{row}.png tiles");
  serve->add_option("--world", serve_world, "Synthetic world for on-demand imagery");
  serve->add_option("--feature-maps", feature_maps, "Directory of {col}_{row}.ogfm feature maps");
  serve->add_option("--weights", weights, "Classifier weights (.ogfw)");
  serve->add_option("--datasets", serve_datasets, "Benchmark records (CSV or GeoJSON)");
  serve->add_option("--training", training_path, "Training locations CSV (lat,lon)");
  serve->add_option("--static", static_dir, "Directory of built review UI assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::FileError& e) {
    err << "facmap: " << e.what() << '\n';
    return kExitNoInput;
  } catch (const CLI::ParseError& e) {
    err << "facmap: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto region = pipeline::parse_region(region_text);
      const auto spec = synthworld::generate_world(region, seed, facilities, noise);
      const fs::path dir = out_path;
      ensure_dir(dir);
      synthworld::write_world(dir / "world.json", spec);
      write_text(dir / "ground_truth.geojson", ground_truth_geojson(spec).dump(2) + "\n");
      if (render) {
        const synthworld::SyntheticImageSource source(spec);
        const auto tiles = geo::enumerate_tiles(region);
        protocol::write_request(dir / "tiles", tiles, source, workers);
      }
      out << "world: " << spec.facilities.size() << " facilities, "
          << geo::tile_range(region).size() << " tiles -> " << (dir / "world.json").string() << '\n';
    } else if (grid->parsed()) {
      const auto region = pipeline::parse_region(grid_region);
      const auto tiles = geo::enumerate_tiles(region);
      std::ofstream f(out_path, std::ios::trunc);
      if (!f) throw IoError("cannot write " + out_path);
      f << "col,row,lat,lon\n";
      for (const auto& t : tiles) {
        const auto c = geo::tile_centroid(t);
        f << t.col << ',' << t.row << ',' << csv::format_double(c.lat()) << ','
          << csv::format_double(c.lon()) << '\n';
      }
      out << tiles.size() << " tiles\n";
    } else if (score->parsed()) {
      if (world_path.empty() == tiles_dir.empty())
        throw ValidationError("score needs exactly one of --world or --tiles");
      const scoring::HeuristicScorer scorer;
      std::vector<scoring::TileScore> scores;
      std::vector<geo::TileIndex> tiles;
      std::unique_ptr<protocol::ImageSource> source;
      std::vector<fs::path> files;
      if (!world_path.empty()) {
        auto spec = synthworld::read_world(world_file(world_path));
        tiles = geo::enumerate_tiles(spec.region);
        source = std::make_unique<synthworld::SyntheticImageSource>(std::move(spec));
      } else {
        const fs::path dir = Paths::input(tiles_dir, "tile directory");
        for (const auto& e : protocol::read_manifest(Paths::input((dir / "tiles.csv").string(), "manifest"))) {
          tiles.push_back(e.tile);
          files.push_back(dir / e.filename);
        }
        for (const auto& f : files)
          if (!fs::is_regular_file(f)) throw NotFoundError("tile image missing: " + f.string());
      }
      scores.resize(tiles.size());
      parallel_for_index(tiles.size(), workers, [&](std::size_t i) {
        try {
          const auto img = source ? source->fetch(tiles[i]) : png::read_tile(files[i]);
          scores[i] = {tiles[i], scorer.score(img)};
        } catch (const std::exception& e) {
          throw scoring::ScoringError(tiles[i], e.what());
        }
      });
      std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.tile < b.tile; });
      protocol::write_scores(out_path, scores);
      out << scores.size() << " tiles scored\n";
    } else if (detect->parsed()) {
      const int sources = !world_path.empty() + !tiles_dir.empty() + !scores_path.empty();
      if (sources != 1) throw ValidationError("detect needs exactly one of --world, --tiles or --scores");
      pipeline::DeploymentConfig config;
      config.op = pipeline::OperatingPoint(threshold);
      config.adjacency = pipeline::parse_adjacency(adjacency_text);
      config.workers = workers;
      if (!exclude_path.empty())
        config.zones = pipeline::read_exclusion_zones(Paths::input(exclude_path, "exclusion zones"));
      const scoring::HeuristicScorer scorer;
      pipeline::DeploymentResult result;
      if (!world_path.empty()) {
        const synthworld::SyntheticImageSource source(synthworld::read_world(world_file(world_path)));
        const auto region = detect_region.empty() ? source.spec().region : pipeline::parse_region(detect_region);
        result = pipeline::run_deployment(region, source, scorer, config);
      } else if (!tiles_dir.empty()) {
        if (detect_region.empty()) throw ValidationError("--tiles requires --region");
        const protocol::DirectoryImageSource source(Paths::input(tiles_dir, "tile directory"));
        result = pipeline::run_deployment(pipeline::parse_region(detect_region), source, scorer, config);
      } else {
        std::optional<geo::BoundingRegion> region;
        if (!detect_region.empty()) region = pipeline::parse_region(detect_region);
        result = pipeline::detect_from_scores(protocol::read_scores(Paths::input(scores_path, "scores")),
                                              config, region);
      }
      const fs::path dir = out_path;
      ensure_dir(dir);
      pipeline::write_detections_geojson(dir / "detections.geojson", result.detections);
      pipeline::write_detections_csv(dir / "detections.csv", result.detections);
      write_text(dir / "manifest.json", result.manifest.to_json().dump(2) + "\n");
      out << result.manifest.tile_count << " tiles, " << result.manifest.positive_count << " positive, "
          << result.detections.size() << " detections\n";
    } else if (metrics->parsed()) {
      auto rows = evaluation::read_labeled_scores(Paths::input(scores_path, "scores"));
      if (const auto split = split_option(split_text)) rows = evaluation::filter_split(rows, *split);
      const auto counts = evaluation::confusion(rows, threshold);
      const auto report_json = evaluation::metrics_to_json(counts, evaluation::compute_metrics(counts), threshold);
      if (!out_path.empty()) write_text(out_path, report_json.dump(2) + "\n");
      out << report_json.dump(2) << '\n';
    } else if (select->parsed()) {
      auto rows = evaluation::read_labeled_scores(Paths::input(scores_path, "scores"));
      if (const auto split = split_option(select_split)) rows = evaluation::filter_split(rows, *split);
      const auto choice = evaluation::select_operating_point(rows);
      ordered_json j{{"threshold", choice.op.threshold()},
                     {"precision", choice.precision},
                     {"recall", choice.recall},
                     {"confusion",
                      {{"tp", choice.counts.tp}, {"fp", choice.counts.fp}, {"fn", choice.counts.fn}, {"tn", choice.counts.tn}}},
                     {"split", select_split}};
      if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
      out << j.dump(2) << '\n';
    } else if (match->parsed()) {
      const auto combined = benchmark::dedup(read_all_records(datasets), dedup_radius);
      write_text(out_path, benchmark::combined_to_geojson(combined).dump(2) + "\n");
      out << "oil_refinery: " << combined.count(benchmark::FacilityType::oil_refinery)
          << ", petroleum_terminal: " << combined.count(benchmark::FacilityType::petroleum_terminal) << '\n';
    } else if (report->parsed()) {
      std::vector<benchmark::LocatedDetection> located;
      if (!verified_path.empty()) {
        located = benchmark::read_located_detections(Paths::input(verified_path, "verified detections"));
      } else if (!detections_path.empty() && !log_path.empty()) {
        const auto dets = pipeline::read_detections_geojson(Paths::input(detections_path, "detections"));
        const auto events = store::read_event_log(Paths::input(log_path, "event log"));
        std::vector<store::ReviewedDetection> verified;
        for (const auto& [id, row] : store::fold(dets, events))
          if (row.status == store::ReviewStatus::confirmed) verified.push_back(row);
        located = store::to_located(verified);
      } else {
        throw ValidationError("report needs --verified, or --detections with --log");
      }
      std::vector<geo::GeoPoint> training;
      if (!training_path.empty())
        training = benchmark::read_training_locations(Paths::input(training_path, "training locations"));
      const auto combined = benchmark::dedup(read_all_records(datasets), dedup_radius);
      const auto cov = benchmark::coverage(combined, located, coverage_radius);
      const auto fresh = benchmark::new_detections(combined, located, training, coverage_radius);
      const auto table = benchmark::table1_report(cov, fresh, located);
      const fs::path dir = out_path;
      ensure_dir(dir);
      write_text(dir / "table1.csv", benchmark::table1_csv(table));
      write_text(dir / "table1.json", benchmark::table1_json(table).dump(2) + "\n");
      out << benchmark::table1_csv(table);
    } else if (serve->parsed()) {
      api.detections_file = Paths::input(detections_path, "detections");
      api.event_log = log_path;
      if (!serve_tiles.empty()) api.tiles_dir = serve_tiles;
      if (!serve_world.empty()) api.world_file = world_file(serve_world);
      if (!feature_maps.empty()) api.feature_map_dir = feature_maps;
      if (!weights.empty()) api.weights_file = weights;
      if (!serve_datasets.empty()) api.datasets_file = serve_datasets;
      if (!training_path.empty()) api.training_file = training_path;
      if (!static_dir.empty()) api.static_dir = static_dir;
      service::ReviewService svc(api);
      g_running_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int port = svc.bind();
      out << "listening on http://" << api.host << ':' << port << std::endl;
      svc.listen();
      g_running_service = nullptr;
    }
  } catch (const NotFoundError& e) {
    err << "facmap: " << e.what() << '\n';
    return kExitNoInput;
  } catch (const ValidationError& e) {
    err << "facmap: " << e.what() << '\n';
    return kExitDataErr;
  } catch (const DomainError& e) {
    err << "facmap: " << e.what() << '\n';
    return kExitDataErr;
  } catch (const IoError& e) {
    err << "facmap: " << e.what() << '\n';
    return kExitIoErr;
  } catch (const std::exception& e) {
    err << "facmap: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}

}  // namespace facmap::cli
