#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "facmap/benchmark.hpp"
#include "facmap/errors.hpp"
#include "facmap/evaluation.hpp"
#include "facmap/pipeline.hpp"
#include "facmap/scoring.hpp"
#include "facmap/synthworld.hpp"

namespace py = pybind11;
using namespace facmap;

namespace {

using Tile = std::pair<std::int32_t, std::int32_t>;

TileImage image_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(0) != TileImage::kHeight || a.shape(1) != TileImage::kWidth ||
      a.shape(2) != TileImage::kChannels)
    throw ValidationError("expected a uint8 array of shape (500, 500, 3)");
  std::vector<std::uint8_t> buf(a.data(), a.data() + TileImage::kBytes);
  return TileImage(std::move(buf));
}

py::array_t<std::uint8_t> image_to_array(const TileImage& img) {
  py::array_t<std::uint8_t> a({TileImage::kHeight, TileImage::kWidth, TileImage::kChannels});
  std::memcpy(a.mutable_data(), img.pixels().data(), TileImage::kBytes);
  return a;
}

std::vector<evaluation::LabeledScore> labeled(const std::vector<bool>& labels, const std::vector<double>& probs) {
  if (labels.size() != probs.size()) throw ValidationError("labels and probabilities differ in length");
  std::vector<evaluation::LabeledScore> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i].id = std::to_string(i);
    out[i].label = labels[i] ? evaluation::Label::positive : evaluation::Label::negative;
    out[i].probability = probs[i];
    evaluation::validate(out[i]);
  }
  return out;
}

py::dict counts_dict(const evaluation::ConfusionCounts& c) {
  py::dict d;
  d["tp"] = c.tp;
  d["fp"] = c.fp;
  d["fn"] = c.fn;
  d["tn"] = c.tn;
  return d;
}

py::dict detection_dict(const pipeline::Detection& d) {
  py::list tiles;
  for (const auto& m : d.members) tiles.append(py::make_tuple(m.tile.col, m.tile.row, m.probability));
  py::dict out;
  out["id"] = d.id;
  out["lat"] = d.centroid.lat();
  out["lon"] = d.centroid.lon();
  out["max_probability"] = d.max_probability;
  out["mean_probability"] = d.mean_probability;
  out["tiles"] = tiles;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "facmap core: tiling, scoring, merging, evaluation, benchmarking";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_FileNotFoundError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.attr("TILE_SIDE_M") = geo::kTileSideM;
  m.attr("TILE_PIXELS") = geo::kTilePixels;

  m.def("project", [](double lat, double lon) {
    const auto q = geo::project(geo::GeoPoint(lat, lon));
    return std::make_pair(q.x, q.y);
  }, py::arg("lat"), py::arg("lon"));
  m.def("unproject", [](double x, double y) {
    const auto p = geo::unproject({x, y});
    return std::make_pair(p.lat(), p.lon());
  }, py::arg("x"), py::arg("y"));
  m.def("haversine_km", [](double lat1, double lon1, double lat2, double lon2) {
    return geo::haversine_km(geo::GeoPoint(lat1, lon1), geo::GeoPoint(lat2, lon2));
  });
  m.def("tile_of", [](double lat, double lon) {
    const auto t = geo::tile_of(geo::GeoPoint(lat, lon));
    return Tile{t.col, t.row};
  }, py::arg("lat"), py::arg("lon"));
  m.def("tile_centroid", [](std::int32_t col, std::int32_t row) {
    const auto p = geo::tile_centroid({col, row});
    return std::make_pair(p.lat(), p.lon());
  }, py::arg("col"), py::arg("row"));
  m.def("enumerate_tiles", [](double min_lat, double min_lon, double max_lat, double max_lon) {
    std::vector<Tile> out;
    for (const auto& t : geo::enumerate_tiles(geo::BoundingRegion(min_lat, min_lon, max_lat, max_lon)))
      out.emplace_back(t.col, t.row);
    return out;
  }, py::arg("min_lat"), py::arg("min_lon"), py::arg("max_lat"), py::arg("max_lon"));

  m.def("heuristic_score", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
    return scoring::heuristic_score(image_from_array(a));
  }, py::arg("image"), "Probability from the bright-pixel fraction of a (500, 500, 3) uint8 tile.");

  m.def("merge", [](const std::vector<std::tuple<std::int32_t, std::int32_t, double>>& scores, double threshold,
                    const std::string& adjacency) {
    std::vector<scoring::TileScore> ts;
    ts.reserve(scores.size());
    for (const auto& [c, r, p] : scores) ts.push_back(scoring::make_tile_score({c, r}, p));
    const auto positive = pipeline::apply_threshold(ts, pipeline::OperatingPoint(threshold));
    py::list out;
    for (const auto& d : pipeline::merge_positive_tiles(positive, pipeline::make_lookup(ts),
                                                        pipeline::parse_adjacency(adjacency)))
      out.append(detection_dict(d));
    return out;
  }, py::arg("scores"), py::arg("threshold"), py::arg("adjacency") = "4",
     "Threshold (col, row, probability) triples and merge positives into detections.");

  m.def("metrics", [](const std::vector<bool>& labels, const std::vector<double>& probs, double threshold) {
    const auto c = evaluation::confusion(labeled(labels, probs), threshold);
    const auto r = evaluation::compute_metrics(c);
    py::dict d = counts_dict(c);
    d["accuracy"] = r.accuracy;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    return d;
  }, py::arg("labels"), py::arg("probabilities"), py::arg("threshold"));

  m.def("select_threshold", [](const std::vector<bool>& labels, const std::vector<double>& probs) {
    const auto choice = evaluation::select_operating_point(labeled(labels, probs));
    py::dict d = counts_dict(choice.counts);
    d["threshold"] = choice.op.threshold();
    d["precision"] = choice.precision;
    d["recall"] = choice.recall;
    return d;
  }, py::arg("labels"), py::arg("probabilities"));

  m.def("dedup", [](const std::vector<std::tuple<std::string, double, double, std::string, std::string>>& records,
                    double radius_km) {
    std::vector<benchmark::FacilityRecord> rs;
    for (const auto& [type, lat, lon, raw_id, source] : records)
      rs.push_back({benchmark::parse_source(source), benchmark::parse_facility_type(type),
                    geo::GeoPoint(lat, lon), raw_id});
    py::list out;
    for (const auto& c : benchmark::dedup(rs, radius_km).clusters) {
      py::list members;
      for (const auto& r : c.members) members.append(r.raw_id);
      py::dict d;
      d["type"] = benchmark::to_string(c.type);
      d["lat"] = c.location.lat();
      d["lon"] = c.location.lon();
      d["members"] = members;
      out.append(d);
    }
    return out;
  }, py::arg("records"), py::arg("radius_km") = benchmark::kDedupRadiusKm,
     "Records are (type, lat, lon, raw_id, source) tuples.");

  m.def("generate_world", [](double min_lat, double min_lon, double max_lat, double max_lon, std::uint64_t seed,
                             int count, double noise) {
    return synthworld::to_json(synthworld::generate_world(geo::BoundingRegion(min_lat, min_lon, max_lat, max_lon),
                                                          seed, count, noise)).dump();
  }, py::arg("min_lat"), py::arg("min_lon"), py::arg("max_lat"), py::arg("max_lon"), py::arg("seed"),
     py::arg("count"), py::arg("noise") = 0.5, "Returns the world spec as a JSON string.");
  m.def("render_tile", [](const std::string& world_json, std::int32_t col, std::int32_t row) {
    const auto spec = synthworld::world_from_json(nlohmann::json::parse(world_json));
    return image_to_array(synthworld::render_tile(spec, {col, row}));
  }, py::arg("world"), py::arg("col"), py::arg("row"));
  m.def("detect_world", [](const std::string& world_json, double threshold, const std::string& adjacency,
                           unsigned workers) {
    const synthworld::SyntheticImageSource source(synthworld::world_from_json(nlohmann::json::parse(world_json)));
    pipeline::DeploymentConfig config;
    config.op = pipeline::OperatingPoint(threshold);
    config.adjacency = pipeline::parse_adjacency(adjacency);
    config.workers = workers;
    const scoring::HeuristicScorer scorer;
    pipeline::DeploymentResult result;
    {
      py::gil_scoped_release release;
      result = pipeline::run_deployment(source.spec().region, source, scorer, config);
    }
    py::list out;
    for (const auto& d : result.detections) out.append(detection_dict(d));
    return out;
  }, py::arg("world"), py::arg("threshold") = 0.5, py::arg("adjacency") = "4", py::arg("workers") = 0);
}
