#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facmap/geo.hpp"

namespace facmap::benchmark {

enum class Source { gogi, ghgrp, hifld, eia, other };
/// Reporting categories. Crude oil and LNG terminals roll up to petroleum_terminal.
enum class FacilityType { oil_refinery, petroleum_terminal };
inline constexpr std::array<FacilityType, 2> kFacilityTypes{FacilityType::oil_refinery,
                                                            FacilityType::petroleum_terminal};

std::string to_string(Source s);
std::string to_string(FacilityType t);
/// Case-insensitive source tag; throws ValidationError for unknown tags.
Source parse_source(const std::string& s);
/// Accepts oil_refinery, petroleum_terminal, crude_oil_terminal and lng_terminal.
FacilityType parse_facility_type(const std::string& s);

inline constexpr double kDedupRadiusKm = 2.0;
inline constexpr double kCoverageRadiusKm = 3.0;

struct FacilityRecord {
  Source source = Source::other;
  FacilityType type = FacilityType::oil_refinery;
  geo::GeoPoint location{0.0, 0.0};
  std::string raw_id;
};

struct Cluster {
  FacilityType type = FacilityType::oil_refinery;
  /// Unprojected mean of member projected coordinates.
  geo::GeoPoint location{0.0, 0.0};
  /// Members in canonical (lat, lon, raw_id, source) order.
  std::vector<FacilityRecord> members;
};

struct CombinedDataset {
  /// Ordered by (type, lat, lon, first raw_id); independent of input order.
  std::vector<Cluster> clusters;

  std::size_t count(FacilityType t) const;
};

/// Single-linkage clustering per facility type: records within radius_km
/// (inclusive, haversine), directly or transitively, share a cluster.
CombinedDataset dedup(std::span<const FacilityRecord> records, double radius_km = kDedupRadiusKm);

/// A verified detection reduced to what matching needs.
struct LocatedDetection {
  std::string id;
  geo::GeoPoint location{0.0, 0.0};
  FacilityType type = FacilityType::oil_refinery;
};

struct TypeCoverage {
  std::size_t total = 0;
  std::size_t covered = 0;
  double fraction = 0.0;
};

struct CoverageReport {
  std::array<TypeCoverage, 2> per_type{};  // indexed by FacilityType
  /// covered_clusters[i] refers to combined.clusters[i].
  std::vector<bool> covered_clusters;
  /// e.g. "empty_combined_dataset"
  std::vector<std::string> flags;

  const TypeCoverage& operator[](FacilityType t) const { return per_type[static_cast<int>(t)]; }
};

/// A cluster is covered when any detection (of any type) lies within radius_km.
CoverageReport coverage(const CombinedDataset& combined, std::span<const LocatedDetection> detections,
                        double radius_km = kCoverageRadiusKm);

struct NewDetections {
  std::array<std::vector<std::string>, 2> ids{};  // indexed by FacilityType

  std::size_t count(FacilityType t) const { return ids[static_cast<int>(t)].size(); }
};

/// Detections with no combined cluster and no training location within radius_km.
NewDetections new_detections(const CombinedDataset& combined,
                             std::span<const LocatedDetection> detections,
                             std::span<const geo::GeoPoint> training_locations,
                             double radius_km = kCoverageRadiusKm);

struct Table1Column {
  FacilityType type = FacilityType::oil_refinery;
  std::size_t total_detections = 0;
  std::size_t covered = 0;
  std::size_t benchmark_total = 0;
  std::size_t new_detections = 0;

  double coverage_fraction() const;
  /// Percentage with one decimal, e.g. "73.5".
  std::string coverage_percent() const;
  friend bool operator==(const Table1Column&, const Table1Column&) = default;
};

struct Table1 {
  std::array<Table1Column, 2> columns{};  // indexed by FacilityType
  std::vector<std::string> flags;

  const Table1Column& operator[](FacilityType t) const { return columns[static_cast<int>(t)]; }
  friend bool operator==(const Table1&, const Table1&) = default;
};

Table1 table1_report(const CoverageReport& cov, const NewDetections& fresh,
                     std::span<const LocatedDetection> detections);

/// metric,oil_refinery,petroleum_terminal
/// total_detections,114,336
/// coverage,73.5% (108/147),23.9% (292/1222)
/// new_detections,6,142
std::string table1_csv(const Table1& t);
Table1 parse_table1_csv(const std::string& text);
nlohmann::ordered_json table1_json(const Table1& t);

/// CSV source,facility_type,lat,lon,raw_id or a GeoJSON FeatureCollection
/// of Points with those properties (chosen by extension .json/.geojson).
std::vector<FacilityRecord> read_records(const std::filesystem::path& path);
void write_records_csv(const std::filesystem::path& path, std::span<const FacilityRecord> records);
nlohmann::ordered_json combined_to_geojson(const CombinedDataset& combined);

/// CSV with lat,lon columns.
std::vector<geo::GeoPoint> read_training_locations(const std::filesystem::path& path);
/// GeoJSON Points with properties id and facility_type (subtypes roll up).
std::vector<LocatedDetection> read_located_detections(const std::filesystem::path& path);
std::vector<LocatedDetection> located_detections_from_geojson(const nlohmann::json& fc);

}  // namespace facmap::benchmark
