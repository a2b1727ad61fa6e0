#include "facmap/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "facmap/errors.hpp"

namespace facmap::store {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::confirmed: return "confirmed";
    case ReviewStatus::rejected: return "rejected";
  }
  return "pending";
}

std::string to_string(FacilityKind k) {
  switch (k) {
    case FacilityKind::oil_refinery: return "oil_refinery";
    case FacilityKind::crude_oil_terminal: return "crude_oil_terminal";
    case FacilityKind::lng_terminal: return "lng_terminal";
  }
  return "oil_refinery";
}

std::string to_string(ReviewAction a) {
  switch (a) {
    case ReviewAction::classify: return "classify";
    case ReviewAction::reject: return "reject";
    case ReviewAction::reopen: return "reopen";
  }
  return "classify";
}

ReviewStatus parse_status(const std::string& s) {
  if (s == "pending") return ReviewStatus::pending;
  if (s == "confirmed") return ReviewStatus::confirmed;
  if (s == "rejected") return ReviewStatus::rejected;
  throw ValidationError("unknown review status '" + s + "'");
}

FacilityKind parse_facility_kind(const std::string& s) {
  if (s == "oil_refinery") return FacilityKind::oil_refinery;
  if (s == "crude_oil_terminal") return FacilityKind::crude_oil_terminal;
  if (s == "lng_terminal") return FacilityKind::lng_terminal;
  throw ValidationError("unknown facility_type '" + s + "'");
}

ReviewAction parse_action(const std::string& s) {
  if (s == "classify") return ReviewAction::classify;
  if (s == "reject") return ReviewAction::reject;
  if (s == "reopen") return ReviewAction::reopen;
  throw ValidationError("unknown review action '" + s + "'");
}

benchmark::FacilityType roll_up(FacilityKind k) {
  return k == FacilityKind::oil_refinery ? benchmark::FacilityType::oil_refinery
                                         : benchmark::FacilityType::petroleum_terminal;
}

ordered_json to_json(const ReviewEvent& e) {
  ordered_json j;
  j["detection_id"] = e.detection_id;
  j["action"] = to_string(e.action);
  if (e.facility_type) j["facility_type"] = to_string(*e.facility_type);
  if (e.tank_count) j["tank_count"] = *e.tank_count;
  j["reviewer"] = e.reviewer;
  j["timestamp"] = e.timestamp;
  return j;
}

ReviewEvent event_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("review event must be a JSON object");
  try {
    ReviewEvent e;
    if (j.contains("detection_id")) e.detection_id = j.at("detection_id").get<std::string>();
    e.action = parse_action(j.at("action").get<std::string>());
    if (j.contains("facility_type") && !j.at("facility_type").is_null())
      e.facility_type = parse_facility_kind(j.at("facility_type").get<std::string>());
    if (j.contains("tank_count") && !j.at("tank_count").is_null()) {
      if (!j.at("tank_count").is_number_integer())
        throw ValidationError("tank_count must be an integer");
      e.tank_count = j.at("tank_count").get<std::int64_t>();
    }
    e.reviewer = j.value("reviewer", std::string{});
    e.timestamp = j.value("timestamp", std::string{});
    return e;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("review event: ") + ex.what());
  }
}

ordered_json to_json(const ReviewedDetection& r) {
  const auto& d = r.detection;
  ordered_json j;
  j["id"] = d.id;
  j["status"] = to_string(r.status);
  j["facility_type"] = r.facility_type ? ordered_json(to_string(*r.facility_type)) : ordered_json(nullptr);
  j["category"] = r.facility_type ? ordered_json(benchmark::to_string(roll_up(*r.facility_type)))
                                  : ordered_json(nullptr);
  j["tank_count"] = r.tank_count ? ordered_json(*r.tank_count) : ordered_json(nullptr);
  j["reviewer"] = r.reviewer;
  j["reviewed_at"] = r.reviewed_at;
  j["lat"] = d.centroid.lat();
  j["lon"] = d.centroid.lon();
  j["max_probability"] = d.max_probability;
  j["mean_probability"] = d.mean_probability;
  j["tile_count"] = d.tile_count();
  auto tiles = ordered_json::array();
  for (const auto& m : d.members) tiles.push_back({m.tile.col, m.tile.row, m.probability});
  j["tiles"] = std::move(tiles);
  return j;
}

bool is_valid_timestamp(const std::string& ts) {
  // YYYY-MM-DDTHH:MM:SSZ
  static constexpr std::string_view kPattern = "dddd-dd-ddTdd:dd:ddZ";
  if (ts.size() != kPattern.size()) return false;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (kPattern[i] == 'd' ? !std::isdigit(static_cast<unsigned char>(ts[i])) : ts[i] != kPattern[i])
      return false;
  }
  const auto num = [&](std::size_t pos, std::size_t len) { return std::stoi(ts.substr(pos, len)); };
  const std::chrono::year_month_day date{std::chrono::year{num(0, 4)},
                                         std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                         std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  return date.ok() && num(11, 2) < 24 && num(14, 2) < 60 && num(17, 2) < 60;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ReviewedDetection next_state(const ReviewedDetection& current, const ReviewEvent& e) {
  const auto& id = current.detection.id;
  if (!is_valid_timestamp(e.timestamp))
    throw IllegalTransition(id + ": timestamp '" + e.timestamp + "' is not YYYY-MM-DDTHH:MM:SSZ");
  if (!current.reviewed_at.empty() && e.timestamp < current.reviewed_at)
    throw IllegalTransition(id + ": timestamp " + e.timestamp + " precedes last review at " +
                            current.reviewed_at);

  ReviewedDetection next = current;
  next.reviewer = e.reviewer;
  next.reviewed_at = e.timestamp;
  switch (e.action) {
    case ReviewAction::classify:
      if (current.status != ReviewStatus::pending)
        throw IllegalTransition(id + ": classify requires a pending detection (status is " +
                                to_string(current.status) + "; reopen first)");
      if (!e.facility_type) throw IllegalTransition(id + ": classify requires facility_type");
      if (e.tank_count && *e.tank_count < 0)
        throw IllegalTransition(id + ": tank_count must be nonnegative");
      next.status = ReviewStatus::confirmed;
      next.facility_type = e.facility_type;
      next.tank_count = e.tank_count;
      break;
    case ReviewAction::reject:
      if (current.status != ReviewStatus::pending)
        throw IllegalTransition(id + ": reject requires a pending detection (status is " +
                                to_string(current.status) + "; reopen first)");
      if (e.facility_type || e.tank_count)
        throw IllegalTransition(id + ": reject carries no facility_type or tank_count");
      next.status = ReviewStatus::rejected;
      next.facility_type.reset();
      next.tank_count.reset();
      break;
    case ReviewAction::reopen:
      if (current.status == ReviewStatus::pending)
        throw IllegalTransition(id + ": detection is already pending");
      if (e.facility_type || e.tank_count)
        throw IllegalTransition(id + ": reopen carries no facility_type or tank_count");
      next.status = ReviewStatus::pending;
      next.facility_type.reset();
      next.tank_count.reset();
      break;
  }
  return next;
}

namespace {

void check_ingestible(const pipeline::Detection& d) {
  if (d.id.empty()) throw ValidationError("detection without id");
  if (d.members.empty()) throw ValidationError("detection '" + d.id + "' has no member tiles");
}

ReviewedDetection fresh(const pipeline::Detection& d) { return {d, ReviewStatus::pending, {}, {}, {}, {}}; }

}  // namespace

State fold(std::span<const pipeline::Detection> detections, std::span<const ReviewEvent> events) {
  State state;
  for (const auto& d : detections) {
    check_ingestible(d);
    state.try_emplace(d.id, fresh(d));
  }
  for (const auto& e : events) {
    auto it = state.find(e.detection_id);
    if (it == state.end()) throw UnknownDetection("unknown detection '" + e.detection_id + "'");
    it->second = next_state(it->second, e);
  }
  return state;
}

std::string serialize(const State& state) {
  std::string out;
  for (const auto& [id, row] : state) {
    out += to_json(row).dump();
    out += '\n';
  }
  return out;
}

std::vector<ReviewEvent> read_event_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open event log " + path.string());
  std::vector<ReviewEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

DetectionStore::DetectionStore(fs::path log_path) : log_path_(std::move(log_path)) {
  if (!fs::exists(*log_path_)) {
    if (log_path_->has_parent_path() && !fs::is_directory(log_path_->parent_path()))
      throw NotFoundError("event log directory does not exist: " + log_path_->parent_path().string());
    std::ofstream touch(*log_path_, std::ios::app);
    if (!touch) throw IoError("cannot create event log " + log_path_->string());
  }
}

DetectionStore::IngestResult DetectionStore::ingest(std::span<const pipeline::Detection> detections) {
  for (const auto& d : detections) check_ingestible(d);
  std::scoped_lock writer(write_mutex_);
  std::unique_lock lock(mutex_);
  IngestResult result;
  for (const auto& d : detections) {
    if (state_.try_emplace(d.id, fresh(d)).second) {
      ingested_.push_back(d);
      ++result.inserted;
    } else {
      result.skipped_duplicates.push_back(d.id);
    }
  }
  return result;
}

std::size_t DetectionStore::replay_log() {
  if (!log_path_) return 0;
  const auto events = read_event_log(*log_path_);
  std::scoped_lock writer(write_mutex_);
  std::unique_lock lock(mutex_);
  auto state = state_;
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto it = state.find(events[i].detection_id);
    if (it == state.end())
      throw UnknownDetection(log_path_->string() + ": event " + std::to_string(i + 1) +
                             " references unknown detection '" + events[i].detection_id + "'");
    it->second = next_state(it->second, events[i]);
  }
  state_ = std::move(state);
  events_.insert(events_.end(), events.begin(), events.end());
  return events.size();
}

void DetectionStore::append_durably(const ReviewEvent& e) {
  if (!log_path_) return;
  const auto line = to_json(e).dump() + "\n";
  const int fd = ::open(log_path_->c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open event log: " + std::string(std::strerror(errno)));
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const auto err = std::string(std::strerror(errno));
      ::close(fd);
      throw IoError("event log write failed: " + err);
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const auto err = std::string(std::strerror(errno));
    ::close(fd);
    throw IoError("event log fsync failed: " + err);
  }
  ::close(fd);
}

ReviewedDetection DetectionStore::apply_review(ReviewEvent event) {
  std::scoped_lock writer(write_mutex_);
  if (event.timestamp.empty()) event.timestamp = utc_now();
  ReviewedDetection next = [&] {
    std::shared_lock read(mutex_);
    const auto it = state_.find(event.detection_id);
    if (it == state_.end()) throw UnknownDetection("unknown detection '" + event.detection_id + "'");
    return next_state(it->second, event);
  }();
  append_durably(event);
  std::unique_lock lock(mutex_);
  state_.at(event.detection_id) = next;
  events_.push_back(std::move(event));
  return next;
}

std::optional<ReviewedDetection> DetectionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = state_.find(id);
  if (it == state_.end()) return std::nullopt;
  return it->second;
}

std::vector<ReviewedDetection> DetectionStore::rows() const {
  std::shared_lock lock(mutex_);
  std::vector<ReviewedDetection> out;
  out.reserve(state_.size());
  for (const auto& [id, row] : state_) out.push_back(row);
  return out;
}

std::vector<ReviewedDetection> DetectionStore::verified_facilities() const {
  std::shared_lock lock(mutex_);
  std::vector<ReviewedDetection> out;
  for (const auto& [id, row] : state_)
    if (row.status == ReviewStatus::confirmed) out.push_back(row);
  return out;
}

std::vector<ReviewEvent> DetectionStore::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

std::vector<pipeline::Detection> DetectionStore::ingested() const {
  std::shared_lock lock(mutex_);
  return ingested_;
}

State DetectionStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

DetectionStore::Counts DetectionStore::counts() const {
  std::shared_lock lock(mutex_);
  Counts c;
  for (const auto& [id, row] : state_) {
    switch (row.status) {
      case ReviewStatus::pending: ++c.pending; break;
      case ReviewStatus::confirmed: ++c.confirmed; break;
      case ReviewStatus::rejected: ++c.rejected; break;
    }
  }
  return c;
}

std::vector<benchmark::LocatedDetection> to_located(std::span<const ReviewedDetection> verified) {
  std::vector<benchmark::LocatedDetection> out;
  for (const auto& r : verified) {
    if (r.status != ReviewStatus::confirmed || !r.facility_type) continue;
    out.push_back({r.detection.id, r.detection.centroid, roll_up(*r.facility_type)});
  }
  return out;
}

ordered_json verified_to_geojson(std::span<const ReviewedDetection> verified) {
  auto features = ordered_json::array();
  for (const auto& r : verified) {
    if (r.status != ReviewStatus::confirmed || !r.facility_type) continue;
    const auto& c = r.detection.centroid;
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Point"}, {"coordinates", {c.lon(), c.lat()}}}},
         {"properties",
          {{"id", r.detection.id},
           {"facility_type", to_string(*r.facility_type)},
           {"category", benchmark::to_string(roll_up(*r.facility_type))},
           {"tank_count", r.tank_count ? ordered_json(*r.tank_count) : ordered_json(nullptr)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace facmap::store
