#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "facmap/benchmark.hpp"
#include "facmap/evaluation.hpp"
#include "facmap/pipeline.hpp"
#include "facmap/store.hpp"

namespace facmap::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "facmap");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);

/// Point displaced by north_km / east_km using the local spherical approximation.
geo::GeoPoint offset_km(const geo::GeoPoint& p, double north_km, double east_km);

/// Verified detections, benchmark records and training locations laid out so
/// that per type the report reads:
///   refineries: 114 detections, 108 of 147 clusters covered, 6 new
///   terminals:  336 detections, 292 of 1222 clusters covered, 142 new
/// Every detection sits on a tile centroid so it is a valid single-tile Detection.
struct BenchmarkFixture {
  std::vector<benchmark::FacilityRecord> records;
  std::vector<geo::GeoPoint> training;
  /// Confirmed facilities with their reviewed kind.
  std::vector<pipeline::Detection> detections;
  std::vector<store::FacilityKind> kinds;
  /// Detections a reviewer rejects; they must not influence the report.
  std::vector<pipeline::Detection> false_positives;

  std::vector<benchmark::LocatedDetection> located() const;
  std::vector<pipeline::Detection> all_detections() const;
  /// Classify every facility (terminals alternate crude/LNG, some with a
  /// reopen round-trip) and reject every false positive.
  std::vector<store::ReviewEvent> review_events() const;
};

const BenchmarkFixture& benchmark_fixture();

/// "2026-01-01T00:00:00Z" plus the given number of seconds (< 1 day).
std::string timestamp_at(int seconds);

/// Labeled scores with the reference split sizes (train 127/5525,
/// validation 13/693, test 9/697). At threshold 0.5 the test split gives
/// tp=9, fp=3, fn=0, tn=694.
std::vector<evaluation::LabeledScore> split_fixture();

pipeline::Detection single_tile_detection(const geo::GeoPoint& at, double probability);

}  // namespace facmap::testing
