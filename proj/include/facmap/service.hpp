#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facmap/benchmark.hpp"
#include "facmap/protocol.hpp"
#include "facmap/scoring.hpp"
#include "facmap/store.hpp"

namespace httplib {
class Server;
}

namespace facmap::service {

struct ApiConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path event_log;
  std::filesystem::path detections_file;
  std::optional<std::filesystem::path> tiles_dir;
  /// Synthetic world spec; imagery is rendered on demand when no PNG tile exists.
  std::optional<std::filesystem::path> world_file;
  std::optional<std::filesystem::path> feature_map_dir;
  std::optional<std::filesystem::path> weights_file;
  std::optional<std::filesystem::path> datasets_file;
  std::optional<std::filesystem::path> training_file;
  std::optional<std::filesystem::path> static_dir;
  std::size_t default_page_size = 100;
  std::size_t max_page_size = 1000;

  /// Throws NotFoundError for a referenced path that does not exist. The
  /// event log itself may be absent (it is created) but its directory must exist.
  void validate() const;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using Query = std::multimap<std::string, std::string>;

/// The review API. Handlers are plain member functions so they can be
/// exercised without sockets; mount() wires them to an httplib server.
class ReviewService {
 public:
  /// Loads detections, opens and replays the event log, and loads optional
  /// imagery, feature maps, weights and benchmark datasets.
  explicit ReviewService(ApiConfig config);
  ~ReviewService();

  Response list_detections(const Query& query) const;
  Response get_detection(const std::string& id) const;
  Response get_image(const std::string& id) const;
  Response get_cam(const std::string& id) const;
  Response post_review(const std::string& id, const std::string& body);
  Response table1() const;
  Response verified_geojson() const;
  Response stats() const;

  void mount(httplib::Server& server);
  /// Binds the configured address; port 0 picks a free port. Returns the port.
  int bind();
  /// Serves on the bound socket until stop().
  void listen();
  /// bind() then listen().
  void serve();
  void stop();

  store::DetectionStore& store() { return *store_; }
  const ApiConfig& config() const { return config_; }

 private:
  std::optional<TileImage> load_tile(const geo::TileIndex& t) const;

  ApiConfig config_;
  std::unique_ptr<store::DetectionStore> store_;
  std::vector<std::unique_ptr<protocol::ImageSource>> image_sources_;
  std::optional<scoring::ClassifierWeights> weights_;
  std::optional<benchmark::CombinedDataset> combined_;
  std::vector<geo::GeoPoint> training_;
  std::unique_ptr<httplib::Server> server_;
};

/// The OpenAPI document describing the endpoints and the benchmark table schema.
const std::string& openapi_document();

}  // namespace facmap::service
