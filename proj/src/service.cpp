#include "facmap/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>

#include "facmap/csv.hpp"
#include "facmap/errors.hpp"
#include "facmap/openapi_document.hpp"
#include "facmap/synthworld.hpp"

namespace facmap::service {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Response json_response(int status, const ordered_json& body) {
  return {status, "application/json", body.dump()};
}

Response error(int status, const std::string& message) {
  return json_response(status, {{"error", message}, {"status", status}});
}

std::optional<std::string> param(const Query& q, const std::string& key) {
  const auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

struct BBox {
  double min_lon, min_lat, max_lon, max_lat;
  bool contains(const geo::GeoPoint& p) const {
    return p.lon() >= min_lon && p.lon() <= max_lon && p.lat() >= min_lat && p.lat() <= max_lat;
  }
};

BBox parse_bbox(const std::string& text) {
  const auto parts = csv::split_line(text);
  if (parts.size() != 4) throw ValidationError("bbox must be min_lon,min_lat,max_lon,max_lat");
  BBox b{csv::parse_double(parts[0], "bbox"), csv::parse_double(parts[1], "bbox"),
         csv::parse_double(parts[2], "bbox"), csv::parse_double(parts[3], "bbox")};
  if (b.min_lon > b.max_lon || b.min_lat > b.max_lat)
    throw ValidationError("bbox minimum exceeds maximum");
  return b;
}

void require(const std::optional<fs::path>& p, const char* what, bool directory) {
  if (!p) return;
  const bool ok = directory ? fs::is_directory(*p) : fs::is_regular_file(*p);
  if (!ok) throw NotFoundError(std::string(what) + " not found: " + p->string());
}

}  // namespace

void ApiConfig::validate() const {
  if (!fs::is_regular_file(detections_file))
    throw NotFoundError("detections file not found: " + detections_file.string());
  if (event_log.empty()) throw NotFoundError("event log path is required");
  const auto log_dir = event_log.has_parent_path() ? event_log.parent_path() : fs::path(".");
  if (!fs::is_directory(log_dir))
    throw NotFoundError("event log directory not found: " + log_dir.string());
  require(tiles_dir, "tile directory", true);
  require(world_file, "world spec", false);
  require(feature_map_dir, "feature-map directory", true);
  require(weights_file, "weights file", false);
  require(datasets_file, "benchmark datasets", false);
  require(training_file, "training locations", false);
  require(static_dir, "static asset directory", true);
  if (default_page_size == 0 || max_page_size < default_page_size)
    throw ValidationError("page sizes must satisfy 0 < default <= max");
}

ReviewService::~ReviewService() = default;

ReviewService::ReviewService(ApiConfig config) : config_(std::move(config)) {
  config_.validate();
  store_ = std::make_unique<store::DetectionStore>(config_.event_log);
  store_->ingest(pipeline::read_detections_geojson(config_.detections_file));
  store_->replay_log();
  if (config_.tiles_dir)
    image_sources_.push_back(std::make_unique<protocol::DirectoryImageSource>(*config_.tiles_dir));
  if (config_.world_file)
    image_sources_.push_back(
        std::make_unique<synthworld::SyntheticImageSource>(synthworld::read_world(*config_.world_file)));
  if (config_.weights_file) weights_ = protocol::read_weights(*config_.weights_file);
  if (config_.datasets_file) combined_ = benchmark::dedup(benchmark::read_records(*config_.datasets_file));
  if (config_.training_file) training_ = benchmark::read_training_locations(*config_.training_file);
}

Response ReviewService::list_detections(const Query& query) const {
  std::optional<store::ReviewStatus> status;
  std::optional<benchmark::FacilityType> type;
  std::optional<BBox> bbox;
  std::size_t page = 1;
  std::size_t page_size = config_.default_page_size;
  try {
    if (auto s = param(query, "status")) status = store::parse_status(*s);
    if (auto t = param(query, "type")) {
      if (*t != "oil_refinery" && *t != "petroleum_terminal")
        throw ValidationError("type must be oil_refinery or petroleum_terminal");
      type = benchmark::parse_facility_type(*t);
    }
    if (auto b = param(query, "bbox")) bbox = parse_bbox(*b);
    if (auto p = param(query, "page")) {
      const auto v = csv::parse_int(*p, "page");
      if (v < 1) throw ValidationError("page must be >= 1");
      page = static_cast<std::size_t>(v);
    }
    if (auto p = param(query, "page_size")) {
      const auto v = csv::parse_int(*p, "page_size");
      if (v < 1) throw ValidationError("page_size must be >= 1");
      page_size = std::min(static_cast<std::size_t>(v), config_.max_page_size);
    }
  } catch (const std::exception& e) {
    return error(400, e.what());
  }

  std::vector<store::ReviewedDetection> matched;
  for (auto& row : store_->rows()) {
    if (status && row.status != *status) continue;
    if (type && (!row.facility_type || store::roll_up(*row.facility_type) != *type)) continue;
    if (bbox && !bbox->contains(row.detection.centroid)) continue;
    matched.push_back(std::move(row));
  }
  auto items = ordered_json::array();
  const auto begin = std::min(matched.size(), (page - 1) * page_size);
  const auto end = std::min(matched.size(), begin + page_size);
  for (auto i = begin; i < end; ++i) items.push_back(store::to_json(matched[i]));
  return json_response(200, {{"items", std::move(items)},
                             {"total", matched.size()},
                             {"page", page},
                             {"page_size", page_size}});
}

Response ReviewService::get_detection(const std::string& id) const {
  const auto row = store_->find(id);
  if (!row) return error(404, "unknown detection '" + id + "'");
  return json_response(200, store::to_json(*row));
}

std::optional<TileImage> ReviewService::load_tile(const geo::TileIndex& t) const {
  for (const auto& src : image_sources_)
    if (src->has(t)) return src->fetch(t);
  return std::nullopt;
}

Response ReviewService::get_image(const std::string& id) const {
  const auto row = store_->find(id);
  if (!row) return error(404, "unknown detection '" + id + "'");
  const auto tile = row->detection.best_member().tile;
  const auto image = load_tile(tile);
  if (!image) return error(404, "no imagery for tile " + protocol::tile_stem(tile));
  return {200, "image/png", [&] {
            const auto png = png::encode_rgb(*image);
            return std::string(png.begin(), png.end());
          }()};
}

Response ReviewService::get_cam(const std::string& id) const {
  const auto row = store_->find(id);
  if (!row) return error(404, "unknown detection '" + id + "'");
  if (!weights_ || !config_.feature_map_dir) return error(409, "no classifier weights or feature maps configured");
  auto members = row->detection.members;
  std::stable_sort(members.begin(), members.end(),
                   [](const auto& a, const auto& b) { return a.probability > b.probability; });
  for (const auto& m : members) {
    const auto path = *config_.feature_map_dir / protocol::tile_ogfm_name(m.tile);
    if (!fs::is_regular_file(path)) continue;
    try {
      const auto cam = scoring::compute_cam(protocol::read_feature_map(path), *weights_);
      const auto gray = scoring::quantize_cam(cam);
      const auto png = png::encode_gray(gray, scoring::Cam::kSide, scoring::Cam::kSide);
      return {200, "image/png", std::string(png.begin(), png.end())};
    } catch (const ValidationError& e) {
      return error(409, e.what());
    }
  }
  return error(409, "no feature maps available for detection '" + id + "'");
}

Response ReviewService::post_review(const std::string& id, const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  store::ReviewEvent event;
  try {
    event = store::event_from_json(parsed);
  } catch (const ValidationError& e) {
    return error(422, e.what());
  }
  if (!event.detection_id.empty() && event.detection_id != id)
    return error(422, "detection_id in body does not match the URL");
  event.detection_id = id;
  try {
    return json_response(200, store::to_json(store_->apply_review(std::move(event))));
  } catch (const store::UnknownDetection& e) {
    return error(404, e.what());
  } catch (const ValidationError& e) {
    return error(422, e.what());
  } catch (const IoError& e) {
    return error(500, e.what());
  }
}

Response ReviewService::table1() const {
  if (!combined_) return error(409, "benchmark datasets not loaded");
  const auto verified = store_->verified_facilities();
  const auto located = store::to_located(verified);
  const auto cov = benchmark::coverage(*combined_, located);
  const auto fresh = benchmark::new_detections(*combined_, located, training_);
  return json_response(200, benchmark::table1_json(benchmark::table1_report(cov, fresh, located)));
}

Response ReviewService::verified_geojson() const {
  const auto verified = store_->verified_facilities();
  return {200, "application/geo+json", store::verified_to_geojson(verified).dump()};
}

Response ReviewService::stats() const {
  const auto c = store_->counts();
  return json_response(200, {{"pending", c.pending},
                             {"confirmed", c.confirmed},
                             {"rejected", c.rejected},
                             {"total", c.pending + c.confirmed + c.rejected}});
}

void ReviewService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto to_query = [](const httplib::Request& req) {
    Query q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    return q;
  };

  server.Get("/detections", [this, send, to_query](const httplib::Request& req, httplib::Response& res) {
    send(res, list_detections(to_query(req)));
  });
  server.Get(R"(/detections/([^/]+)/image)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_image(req.matches[1]));
  });
  server.Get(R"(/detections/([^/]+)/cam)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_cam(req.matches[1]));
  });
  server.Post(R"(/detections/([^/]+)/review)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_review(req.matches[1], req.body));
  });
  server.Get(R"(/detections/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_detection(req.matches[1]));
  });
  server.Get("/reports/table1", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, table1());
  });
  server.Get("/facilities.geojson", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, verified_geojson());
  });
  server.Get("/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, stats()); });
  server.Get("/openapi.json", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(openapi_document(), "application/json");
  });
  if (config_.static_dir) server.set_mount_point("/", config_.static_dir->string());
}

int ReviewService::bind() {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  int port = config_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(config_.host);
    if (port < 0) throw IoError("cannot bind " + config_.host);
  } else if (!server_->bind_to_port(config_.host, port)) {
    throw IoError("cannot listen on " + config_.host + ":" + std::to_string(port));
  }
  return port;
}

void ReviewService::listen() {
  if (!server_) throw std::logic_error("listen() before bind()");
  if (!server_->listen_after_bind()) throw IoError("server stopped with an error");
}

void ReviewService::serve() {
  bind();
  listen();
}

void ReviewService::stop() {
  if (server_) server_->stop();
}

const std::string& openapi_document() {
  static const std::string doc = kOpenApiDocument;
  return doc;
}

}  // namespace facmap::service
