#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facmap/benchmark.hpp"
#include "facmap/pipeline.hpp"

namespace facmap::store {

enum class ReviewStatus { pending, confirmed, rejected };
/// Facility classes a reviewer can assign; "negative" is expressed by rejecting.
enum class FacilityKind { oil_refinery, crude_oil_terminal, lng_terminal };
enum class ReviewAction { classify, reject, reopen };

std::string to_string(ReviewStatus s);
std::string to_string(FacilityKind k);
std::string to_string(ReviewAction a);
ReviewStatus parse_status(const std::string& s);
FacilityKind parse_facility_kind(const std::string& s);
ReviewAction parse_action(const std::string& s);

/// Reporting roll-up: both terminal kinds become petroleum_terminal.
benchmark::FacilityType roll_up(FacilityKind k);

struct ReviewEvent {
  std::string detection_id;
  ReviewAction action = ReviewAction::classify;
  std::optional<FacilityKind> facility_type;
  std::optional<std::int64_t> tank_count;
  std::string reviewer;
  /// UTC, "YYYY-MM-DDTHH:MM:SSZ". Empty means "now" when applied to a live store.
  std::string timestamp;
};

nlohmann::ordered_json to_json(const ReviewEvent& e);
ReviewEvent event_from_json(const nlohmann::json& j);

struct ReviewedDetection {
  pipeline::Detection detection;
  ReviewStatus status = ReviewStatus::pending;
  std::optional<FacilityKind> facility_type;
  std::optional<std::int64_t> tank_count;
  std::string reviewer;
  std::string reviewed_at;
};

nlohmann::ordered_json to_json(const ReviewedDetection& r);

/// Unknown detection id.
class UnknownDetection : public NotFoundError {
 public:
  using NotFoundError::NotFoundError;
};

/// Event not allowed in the current state, or a payload that breaks the
/// state invariants (classify without facility_type, negative tank count, ...).
class IllegalTransition : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Pure transition function shared by the live store and log replay.
ReviewedDetection next_state(const ReviewedDetection& current, const ReviewEvent& e);

/// Current UTC time in the event timestamp format.
std::string utc_now();
bool is_valid_timestamp(const std::string& ts);

using State = std::map<std::string, ReviewedDetection>;

/// Folds events over freshly ingested (pending) detections. Throws like
/// apply_review on an invalid event.
State fold(std::span<const pipeline::Detection> detections, std::span<const ReviewEvent> events);

/// Canonical serialization of a state; equal states give equal bytes.
std::string serialize(const State& state);

/// Reads a newline-delimited JSON event log.
std::vector<ReviewEvent> read_event_log(const std::filesystem::path& path);

/// Detection database with an append-only review log. One writer at a time
/// (apply_review serializes), any number of concurrent readers.
class DetectionStore {
 public:
  /// In-memory store with no log file.
  DetectionStore() = default;
  /// Store backed by an event log at log_path (created if absent). Replay of
  /// existing events happens in replay_log(), after detections are ingested.
  explicit DetectionStore(std::filesystem::path log_path);

  DetectionStore(const DetectionStore&) = delete;
  DetectionStore& operator=(const DetectionStore&) = delete;

  struct IngestResult {
    std::size_t inserted = 0;
    std::vector<std::string> skipped_duplicates;
  };

  /// Inserts detections as pending. Ids already present are skipped.
  /// Malformed detections (empty id, no member tiles) throw ValidationError
  /// and nothing is inserted.
  IngestResult ingest(std::span<const pipeline::Detection> detections);

  /// Applies every event from the log file without re-appending them.
  std::size_t replay_log();

  /// Validates, appends durably to the log, then updates state.
  ReviewedDetection apply_review(ReviewEvent event);

  std::optional<ReviewedDetection> find(const std::string& id) const;
  /// All rows ordered by id.
  std::vector<ReviewedDetection> rows() const;
  /// Confirmed rows ordered by id.
  std::vector<ReviewedDetection> verified_facilities() const;
  std::vector<ReviewEvent> events() const;
  std::vector<pipeline::Detection> ingested() const;
  State snapshot() const;

  struct Counts {
    std::size_t pending = 0, confirmed = 0, rejected = 0;
  };
  Counts counts() const;

  const std::optional<std::filesystem::path>& log_path() const { return log_path_; }

 private:
  void append_durably(const ReviewEvent& e);

  std::optional<std::filesystem::path> log_path_;
  mutable std::shared_mutex mutex_;
  std::mutex write_mutex_;
  State state_;
  std::vector<pipeline::Detection> ingested_;
  std::vector<ReviewEvent> events_;
};

/// Confirmed facilities as benchmark inputs (kind rolled up).
std::vector<benchmark::LocatedDetection> to_located(std::span<const ReviewedDetection> verified);

/// FeatureCollection of confirmed facilities: properties id, facility_type,
/// category (rolled-up type), tank_count.
nlohmann::ordered_json verified_to_geojson(std::span<const ReviewedDetection> verified);

}  // namespace facmap::store
