#include "fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace facmap::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
  std::string templ = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (!::mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

geo::GeoPoint offset_km(const geo::GeoPoint& p, double north_km, double east_km) {
  constexpr double kKmPerDeg = geo::kHaversineRadiusKm * M_PI / 180.0;
  const double lat = p.lat() + north_km / kKmPerDeg;
  const double lon = p.lon() + east_km / (kKmPerDeg * std::cos(p.lat() * M_PI / 180.0));
  return geo::GeoPoint(lat, lon);
}

pipeline::Detection single_tile_detection(const geo::GeoPoint& at, double probability) {
  return pipeline::make_detection({scoring::make_tile_score(geo::tile_of(at), probability)});
}

namespace {

using benchmark::FacilityRecord;
using benchmark::FacilityType;
using benchmark::Source;

constexpr std::array<Source, 4> kSources{Source::gogi, Source::ghgrp, Source::hifld, Source::eia};

BenchmarkFixture build_fixture() {
  BenchmarkFixture fx;
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> jitter(-0.12, 0.12);  // km per axis, so <= 170 m
  std::uniform_int_distribution<int> copies(1, 3);
  int raw = 0;

  // Slots on a 0.25 degree lattice (>= 20 km apart below 40N).
  int slot = 0;
  auto next_slot = [&] {
    const int row = slot / 40, col = slot % 40;
    ++slot;
    return geo::GeoPoint(30.0 + 0.25 * row, -110.0 + 0.25 * col);
  };
  auto add_cluster = [&](const geo::GeoPoint& c, FacilityType t) {
    const int n = copies(rng);
    for (int i = 0; i < n; ++i) {
      FacilityRecord r;
      r.source = kSources[(raw + i) % kSources.size()];
      r.type = t;
      r.location = offset_km(c, jitter(rng), jitter(rng));
      r.raw_id = "rec" + std::to_string(raw++);
      fx.records.push_back(r);
    }
  };
  auto detection_at = [&](const geo::GeoPoint& slot_center) {
    return geo::tile_centroid(geo::tile_of(slot_center));
  };
  auto add_detection = [&](const geo::GeoPoint& p, store::FacilityKind kind) {
    fx.detections.push_back(single_tile_detection(p, 0.9));
    fx.kinds.push_back(kind);
  };
  int terminal_flip = 0;
  auto terminal_kind = [&] {
    return (terminal_flip++ % 3 == 2) ? store::FacilityKind::lng_terminal
                                      : store::FacilityKind::crude_oil_terminal;
  };

  const auto refinery = FacilityType::oil_refinery;
  const auto terminal = FacilityType::petroleum_terminal;

  // Refineries: 108 covered at 1 km, 39 uncovered, 6 new detections.
  for (int i = 0; i < 108; ++i) {
    const auto d = detection_at(next_slot());
    add_cluster(offset_km(d, 0.6, 0.8), refinery);
    add_detection(d, store::FacilityKind::oil_refinery);
  }
  for (int i = 0; i < 39; ++i) add_cluster(next_slot(), refinery);
  for (int i = 0; i < 6; ++i) add_detection(detection_at(next_slot()), store::FacilityKind::oil_refinery);

  // Terminals: 102 detections each covering a pair of clusters 4 km apart,
  // 88 covering one cluster, 4 near a training location only, 142 new, and
  // 930 uncovered clusters. 102*2 + 88 = 292 covered, 102+88+4+142 = 336.
  for (int i = 0; i < 102; ++i) {
    const auto d = detection_at(next_slot());
    add_cluster(offset_km(d, 0.0, -2.0), terminal);
    add_cluster(offset_km(d, 0.0, 2.0), terminal);
    add_detection(d, terminal_kind());
  }
  for (int i = 0; i < 88; ++i) {
    const auto d = detection_at(next_slot());
    add_cluster(offset_km(d, -1.0, 0.5), terminal);
    add_detection(d, terminal_kind());
  }
  for (int i = 0; i < 4; ++i) {
    const auto d = detection_at(next_slot());
    fx.training.push_back(offset_km(d, 1.5, 1.5));
    add_detection(d, terminal_kind());
  }
  for (int i = 0; i < 142; ++i) add_detection(detection_at(next_slot()), terminal_kind());
  for (int i = 0; i < 930; ++i) add_cluster(next_slot(), terminal);

  // Training locations far from everything else, and rejected detections
  // sitting right on benchmark clusters (they would change the report if counted).
  for (int i = 0; i < 10; ++i) fx.training.push_back(next_slot());
  for (int i = 0; i < 40; ++i) {
    const auto& r = fx.records[fx.records.size() - 1 - static_cast<std::size_t>(i) * 7];
    fx.false_positives.push_back(single_tile_detection(r.location, 0.6));
  }
  if (slot > 1600) throw std::logic_error("fixture lattice overflow");
  return fx;
}

}  // namespace

std::vector<benchmark::LocatedDetection> BenchmarkFixture::located() const {
  std::vector<benchmark::LocatedDetection> out;
  for (std::size_t i = 0; i < detections.size(); ++i)
    out.push_back({detections[i].id, detections[i].centroid, store::roll_up(kinds[i])});
  return out;
}

std::vector<pipeline::Detection> BenchmarkFixture::all_detections() const {
  auto out = detections;
  out.insert(out.end(), false_positives.begin(), false_positives.end());
  return out;
}

std::string timestamp_at(int seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "2026-01-01T%02d:%02d:%02dZ", seconds / 3600, seconds / 60 % 60, seconds % 60);
  return buf;
}

std::vector<store::ReviewEvent> BenchmarkFixture::review_events() const {
  std::vector<store::ReviewEvent> events;
  int t = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& id = detections[i].id;
    if (i % 25 == 0) {
      // A mistaken rejection, reopened and then classified.
      events.push_back({id, store::ReviewAction::reject, std::nullopt, std::nullopt, "reviewer-a", timestamp_at(t++)});
      events.push_back({id, store::ReviewAction::reopen, std::nullopt, std::nullopt, "reviewer-b", timestamp_at(t++)});
    }
    events.push_back({id, store::ReviewAction::classify, kinds[i], static_cast<std::int64_t>(3 + i % 40),
                      i % 2 ? "reviewer-a" : "reviewer-b", timestamp_at(t++)});
  }
  for (const auto& d : false_positives)
    events.push_back({d.id, store::ReviewAction::reject, std::nullopt, std::nullopt, "reviewer-a", timestamp_at(t++)});
  return events;
}

const BenchmarkFixture& benchmark_fixture() {
  static const BenchmarkFixture fx = build_fixture();
  return fx;
}

std::vector<evaluation::LabeledScore> split_fixture() {
  using evaluation::Label;
  using evaluation::NegativeCategory;
  using evaluation::Split;
  struct Part {
    Split split;
    int positives, negatives, false_positives;
  };
  const Part parts[] = {{Split::train, 127, 5525, 20}, {Split::validation, 13, 693, 4}, {Split::test, 9, 697, 3}};
  constexpr NegativeCategory kCats[] = {NegativeCategory::random,   NegativeCategory::urban,  NegativeCategory::well_pad,
                                        NegativeCategory::cropland, NegativeCategory::forest, NegativeCategory::snow,
                                        NegativeCategory::other};
  std::vector<evaluation::LabeledScore> out;
  int n = 0;
  for (const auto& part : parts) {
    for (int i = 0; i < part.positives; ++i) {
      evaluation::LabeledScore s;
      s.id = "ex" + std::to_string(n++);
      s.split = part.split;
      s.label = Label::positive;
      s.probability = 0.55 + 0.4 * i / part.positives;
      out.push_back(s);
    }
    for (int i = 0; i < part.negatives; ++i) {
      evaluation::LabeledScore s;
      s.id = "ex" + std::to_string(n++);
      s.split = part.split;
      s.label = Label::negative;
      s.probability = i < part.false_positives ? 0.5 + 0.01 * i : 0.4 * i / part.negatives;
      s.negative_category = kCats[i % 7];
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace facmap::testing
