#include "facmap/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>

#include "facmap/csv.hpp"
#include "facmap/errors.hpp"
#include "facmap/union_find.hpp"

namespace facmap::benchmark {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool within(const geo::GeoPoint& a, const geo::GeoPoint& b, double radius_km) {
  return geo::haversine_km(a, b) <= radius_km;
}

bool any_within(const geo::GeoPoint& p, std::span<const geo::GeoPoint> others, double radius_km) {
  return std::any_of(others.begin(), others.end(),
                     [&](const geo::GeoPoint& q) { return within(p, q, radius_km); });
}

auto canonical_key(const FacilityRecord& r) {
  return std::make_tuple(r.location.lat(), r.location.lon(), std::cref(r.raw_id),
                         static_cast<int>(r.source));
}

geo::GeoPoint projected_mean(std::span<const FacilityRecord> members) {
  double sx = 0.0, sy = 0.0;
  for (const auto& m : members) {
    const auto q = geo::project(m.location);
    sx += q.x;
    sy += q.y;
  }
  const auto n = static_cast<double>(members.size());
  return geo::unproject({sx / n, sy / n});
}

}  // namespace

std::string to_string(Source s) {
  switch (s) {
    case Source::gogi: return "GOGI";
    case Source::ghgrp: return "GHGRP";
    case Source::hifld: return "HIFLD";
    case Source::eia: return "EIA";
    case Source::other: return "other";
  }
  return "other";
}

std::string to_string(FacilityType t) {
  return t == FacilityType::oil_refinery ? "oil_refinery" : "petroleum_terminal";
}

Source parse_source(const std::string& s) {
  const auto l = lower(s);
  if (l == "gogi") return Source::gogi;
  if (l == "ghgrp") return Source::ghgrp;
  if (l == "hifld") return Source::hifld;
  if (l == "eia") return Source::eia;
  if (l == "other") return Source::other;
  throw ValidationError("unknown source tag '" + s + "'");
}

FacilityType parse_facility_type(const std::string& s) {
  const auto l = lower(s);
  if (l == "oil_refinery") return FacilityType::oil_refinery;
  if (l == "petroleum_terminal" || l == "crude_oil_terminal" || l == "lng_terminal")
    return FacilityType::petroleum_terminal;
  throw ValidationError("unknown facility type '" + s + "'");
}

std::size_t CombinedDataset::count(FacilityType t) const {
  return static_cast<std::size_t>(std::count_if(
      clusters.begin(), clusters.end(), [&](const Cluster& c) { return c.type == t; }));
}

CombinedDataset dedup(std::span<const FacilityRecord> records, double radius_km) {
  if (!(radius_km >= 0.0)) throw ValidationError("dedup radius must be >= 0");
  // Great-circle distance is at least R * |dlat|, so a latitude-sorted sweep
  // can stop once the latitude gap alone exceeds the radius.
  const double lat_window_deg =
      radius_km / geo::kHaversineRadiusKm * 180.0 / std::numbers::pi * (1.0 + 1e-9);

  CombinedDataset out;
  for (auto type : kFacilityTypes) {
    std::vector<FacilityRecord> recs;
    for (const auto& r : records)
      if (r.type == type) recs.push_back(r);
    std::sort(recs.begin(), recs.end(),
              [](const auto& a, const auto& b) { return canonical_key(a) < canonical_key(b); });

    UnionFind uf(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      for (std::size_t j = i + 1; j < recs.size(); ++j) {
        if (recs[j].location.lat() - recs[i].location.lat() > lat_window_deg) break;
        if (within(recs[i].location, recs[j].location, radius_km)) uf.unite(i, j);
      }
    }
    for (const auto& group : uf.groups()) {
      Cluster c;
      c.type = type;
      for (auto i : group) c.members.push_back(recs[i]);
      c.location = projected_mean(c.members);
      out.clusters.push_back(std::move(c));
    }
  }
  std::sort(out.clusters.begin(), out.clusters.end(), [](const Cluster& a, const Cluster& b) {
    return std::make_tuple(a.type, a.location.lat(), a.location.lon(),
                           std::cref(a.members.front().raw_id)) <
           std::make_tuple(b.type, b.location.lat(), b.location.lon(),
                           std::cref(b.members.front().raw_id));
  });
  return out;
}

CoverageReport coverage(const CombinedDataset& combined, std::span<const LocatedDetection> detections,
                        double radius_km) {
  CoverageReport rep;
  rep.covered_clusters.assign(combined.clusters.size(), false);
  if (combined.clusters.empty()) rep.flags.push_back("empty_combined_dataset");
  for (std::size_t i = 0; i < combined.clusters.size(); ++i) {
    const auto& c = combined.clusters[i];
    auto& tc = rep.per_type[static_cast<int>(c.type)];
    ++tc.total;
    const bool hit = std::any_of(detections.begin(), detections.end(), [&](const auto& d) {
      return within(c.location, d.location, radius_km);
    });
    if (hit) {
      ++tc.covered;
      rep.covered_clusters[i] = true;
    }
  }
  for (auto& tc : rep.per_type)
    tc.fraction = tc.total == 0 ? 0.0 : static_cast<double>(tc.covered) / static_cast<double>(tc.total);
  return rep;
}

NewDetections new_detections(const CombinedDataset& combined,
                             std::span<const LocatedDetection> detections,
                             std::span<const geo::GeoPoint> training_locations,
                             double radius_km) {
  std::vector<geo::GeoPoint> cluster_points;
  cluster_points.reserve(combined.clusters.size());
  for (const auto& c : combined.clusters) cluster_points.push_back(c.location);

  NewDetections out;
  for (const auto& d : detections) {
    if (any_within(d.location, cluster_points, radius_km)) continue;
    if (any_within(d.location, training_locations, radius_km)) continue;
    out.ids[static_cast<int>(d.type)].push_back(d.id);
  }
  return out;
}

double Table1Column::coverage_fraction() const {
  return benchmark_total == 0 ? 0.0
                              : static_cast<double>(covered) / static_cast<double>(benchmark_total);
}

std::string Table1Column::coverage_percent() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * coverage_fraction());
  return buf;
}

Table1 table1_report(const CoverageReport& cov, const NewDetections& fresh,
                     std::span<const LocatedDetection> detections) {
  Table1 t;
  t.flags = cov.flags;
  for (auto type : kFacilityTypes) {
    auto& col = t.columns[static_cast<int>(type)];
    col.type = type;
    col.covered = cov[type].covered;
    col.benchmark_total = cov[type].total;
    col.new_detections = fresh.count(type);
    col.total_detections = static_cast<std::size_t>(std::count_if(
        detections.begin(), detections.end(), [&](const auto& d) { return d.type == type; }));
  }
  return t;
}

std::string table1_csv(const Table1& t) {
  std::ostringstream out;
  const auto& r = t[FacilityType::oil_refinery];
  const auto& p = t[FacilityType::petroleum_terminal];
  auto cov = [](const Table1Column& c) {
    return c.coverage_percent() + "% (" + std::to_string(c.covered) + "/" +
           std::to_string(c.benchmark_total) + ")";
  };
  out << "metric,oil_refinery,petroleum_terminal\n";
  out << "total_detections," << r.total_detections << ',' << p.total_detections << '\n';
  out << "coverage," << cov(r) << ',' << cov(p) << '\n';
  out << "new_detections," << r.new_detections << ',' << p.new_detections << '\n';
  return out.str();
}

Table1 parse_table1_csv(const std::string& text) {
  std::istringstream in(text);
  const auto table = csv::Table::read(in, {"metric", "oil_refinery", "petroleum_terminal"}, "table1");
  Table1 t;
  t.columns[0].type = FacilityType::oil_refinery;
  t.columns[1].type = FacilityType::petroleum_terminal;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& metric = table.cell(i, "metric");
    for (auto type : kFacilityTypes) {
      auto& col = t.columns[static_cast<int>(type)];
      const auto& cell = table.cell(i, to_string(type));
      if (metric == "total_detections") {
        col.total_detections = static_cast<std::size_t>(csv::parse_int(cell, metric));
      } else if (metric == "new_detections") {
        col.new_detections = static_cast<std::size_t>(csv::parse_int(cell, metric));
      } else if (metric == "coverage") {
        const auto open = cell.find('(');
        const auto slash = cell.find('/', open);
        const auto close = cell.find(')', slash);
        if (open == std::string::npos || slash == std::string::npos || close == std::string::npos)
          throw ValidationError("table1: malformed coverage cell '" + cell + "'");
        col.covered = static_cast<std::size_t>(
            csv::parse_int(cell.substr(open + 1, slash - open - 1), "covered"));
        col.benchmark_total = static_cast<std::size_t>(
            csv::parse_int(cell.substr(slash + 1, close - slash - 1), "total"));
        if (cell.substr(0, open) != col.coverage_percent() + "% ")
          throw ValidationError("table1: coverage percent inconsistent with counts in '" + cell + "'");
      } else {
        throw ValidationError("table1: unknown metric '" + metric + "'");
      }
    }
  }
  return t;
}

ordered_json table1_json(const Table1& t) {
  ordered_json j;
  for (auto type : kFacilityTypes) {
    const auto& c = t[type];
    j[to_string(type)] = {{"total_detections", c.total_detections},
                          {"coverage",
                           {{"covered", c.covered},
                            {"total", c.benchmark_total},
                            {"fraction", c.coverage_fraction()},
                            {"percent", c.coverage_percent()}}},
                          {"new_detections", c.new_detections}};
  }
  j["flags"] = t.flags;
  return j;
}

std::vector<FacilityRecord> read_records(const fs::path& path) {
  const auto ext = lower(path.extension().string());
  std::vector<FacilityRecord> out;
  if (ext == ".json" || ext == ".geojson") {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path.string());
    try {
      const auto fc = json::parse(in);
      for (const auto& f : fc.at("features")) {
        const auto& coords = f.at("geometry").at("coordinates");
        const auto& props = f.at("properties");
        out.push_back({parse_source(props.at("source").get<std::string>()),
                       parse_facility_type(props.at("facility_type").get<std::string>()),
                       geo::GeoPoint(coords.at(1).get<double>(), coords.at(0).get<double>()),
                       props.value("raw_id", std::string{})});
      }
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    return out;
  }
  const auto table = csv::Table::read_file(path, {"source", "facility_type", "lat", "lon", "raw_id"});
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(table.line_of(i));
    try {
      out.push_back({parse_source(table.cell(i, "source")),
                     parse_facility_type(table.cell(i, "facility_type")),
                     geo::GeoPoint(csv::parse_double(table.cell(i, "lat"), "lat"),
                                   csv::parse_double(table.cell(i, "lon"), "lon")),
                     table.cell(i, "raw_id")});
    } catch (const std::logic_error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return out;
}

void write_records_csv(const fs::path& path, std::span<const FacilityRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "source,facility_type,lat,lon,raw_id\n";
  for (const auto& r : records)
    csv::write_row(out, {to_string(r.source), to_string(r.type), csv::format_double(r.location.lat()),
                         csv::format_double(r.location.lon()), r.raw_id});
}

ordered_json combined_to_geojson(const CombinedDataset& combined) {
  auto features = ordered_json::array();
  for (const auto& c : combined.clusters) {
    auto ids = ordered_json::array();
    auto sources = ordered_json::array();
    for (const auto& m : c.members) {
      ids.push_back(m.raw_id);
      sources.push_back(to_string(m.source));
    }
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Point"}, {"coordinates", {c.location.lon(), c.location.lat()}}}},
         {"properties",
          {{"facility_type", to_string(c.type)},
           {"member_count", c.members.size()},
           {"raw_ids", std::move(ids)},
           {"sources", std::move(sources)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

std::vector<geo::GeoPoint> read_training_locations(const fs::path& path) {
  const auto table = csv::Table::read_file(path, {"lat", "lon"});
  std::vector<geo::GeoPoint> out;
  for (std::size_t i = 0; i < table.size(); ++i)
    out.emplace_back(csv::parse_double(table.cell(i, "lat"), "lat"),
                     csv::parse_double(table.cell(i, "lon"), "lon"));
  return out;
}

std::vector<LocatedDetection> located_detections_from_geojson(const json& fc) {
  std::vector<LocatedDetection> out;
  try {
    for (const auto& f : fc.at("features")) {
      const auto& coords = f.at("geometry").at("coordinates");
      const auto& props = f.at("properties");
      out.push_back({props.at("id").get<std::string>(),
                     geo::GeoPoint(coords.at(1).get<double>(), coords.at(0).get<double>()),
                     parse_facility_type(props.at("facility_type").get<std::string>())});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("verified detections: ") + e.what());
  }
  return out;
}

std::vector<LocatedDetection> read_located_detections(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return located_detections_from_geojson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace facmap::benchmark
