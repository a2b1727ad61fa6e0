#include "facmap/protocol.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "facmap/csv.hpp"
#include "facmap/errors.hpp"
#include "facmap/parallel.hpp"

namespace facmap::protocol {
namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  void expect_magic(const char (&magic)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
      throw ValidationError(std::string(what_) + ": bad magic, expected " + magic);
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError(std::string(what_) + ": truncated");
  }
  std::span<const std::uint8_t> bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string tile_stem(const geo::TileIndex& t) {
  return std::to_string(t.col) + "_" + std::to_string(t.row);
}
std::string tile_png_name(const geo::TileIndex& t) { return tile_stem(t) + ".png"; }
std::string tile_ogfm_name(const geo::TileIndex& t) { return tile_stem(t) + ".ogfm"; }

DirectoryImageSource::DirectoryImageSource(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw NotFoundError("tile directory not found: " + dir_.string());
}

bool DirectoryImageSource::has(const geo::TileIndex& t) const {
  return fs::is_regular_file(dir_ / tile_png_name(t));
}

TileImage DirectoryImageSource::fetch(const geo::TileIndex& t) const {
  return png::read_tile(dir_ / tile_png_name(t));
}

void write_request(const fs::path& dir, std::span<const geo::TileIndex> tiles,
                   const ImageSource& source, unsigned workers, int png_compression) {
  fs::create_directories(dir);
  parallel_for_index(tiles.size(), workers, [&](std::size_t i) {
    png::write_tile(dir / tile_png_name(tiles[i]), source.fetch(tiles[i]), png_compression);
  });
  std::vector<ManifestEntry> entries;
  entries.reserve(tiles.size());
  for (const auto& t : tiles) entries.push_back({t, tile_png_name(t)});
  write_manifest(dir / "tiles.csv", entries);
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "col,row,filename\n";
  for (const auto& e : entries)
    csv::write_row(out, {std::to_string(e.tile.col), std::to_string(e.tile.row), e.filename});
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const auto table = csv::Table::read_file(path, {"col", "row", "filename"});
  std::vector<ManifestEntry> entries;
  entries.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto col = csv::parse_int(table.cell(i, "col"), "col");
    const auto row = csv::parse_int(table.cell(i, "row"), "row");
    entries.push_back({{static_cast<std::int32_t>(col), static_cast<std::int32_t>(row)},
                       table.cell(i, "filename")});
  }
  return entries;
}

void write_scores(const fs::path& path, std::span<const scoring::TileScore> scores) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "col,row,probability\n";
  for (const auto& s : scores)
    out << s.tile.col << ',' << s.tile.row << ',' << csv::format_double(s.probability) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<scoring::TileScore> read_scores(const fs::path& path) {
  const auto table = csv::Table::read_file(path, {"col", "row", "probability"});
  std::vector<scoring::TileScore> scores;
  scores.reserve(table.size());
  std::set<geo::TileIndex> seen;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(table.line_of(i));
    const geo::TileIndex t{static_cast<std::int32_t>(csv::parse_int(table.cell(i, "col"), where)),
                           static_cast<std::int32_t>(csv::parse_int(table.cell(i, "row"), where))};
    if (!seen.insert(t).second) throw ValidationError(where + ": duplicate tile");
    try {
      scores.push_back(
          scoring::make_tile_score(t, csv::parse_double(table.cell(i, "probability"), where)));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  std::sort(scores.begin(), scores.end(),
            [](const auto& a, const auto& b) { return a.tile < b.tile; });
  return scores;
}

std::vector<std::uint8_t> encode_feature_map(const scoring::FeatureMap& fm) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + fm.values().size() * 4);
  out.insert(out.end(), {'O', 'G', 'F', 'M'});
  put_u32(out, fm.channels());
  put_u32(out, scoring::kFeatureMapSide);
  put_u32(out, scoring::kFeatureMapSide);
  for (float v : fm.values()) put_f32(out, v);
  return out;
}

scoring::FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "ogfm");
  r.expect_magic("OGFM");
  const auto c = r.u32();
  const auto h = r.u32();
  const auto w = r.u32();
  if (h != scoring::kFeatureMapSide || w != scoring::kFeatureMapSide)
    throw ValidationError("ogfm: spatial dims must be 15x15, got " + std::to_string(h) + "x" +
                          std::to_string(w));
  const std::size_t count = static_cast<std::size_t>(c) * h * w;
  if (r.remaining() != count * 4)
    throw ValidationError("ogfm: payload size does not match C*H*W");
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return scoring::FeatureMap(c, std::move(values));
}

void write_feature_map(const fs::path& path, const scoring::FeatureMap& fm) {
  write_file_bytes(path, encode_feature_map(fm));
}

scoring::FeatureMap read_feature_map(const fs::path& path) {
  return decode_feature_map(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_weights(const scoring::ClassifierWeights& w) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'O', 'G', 'F', 'W'});
  put_u32(out, static_cast<std::uint32_t>(w.size()));
  for (float v : w.values()) put_f32(out, v);
  return out;
}

scoring::ClassifierWeights decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "ogfw");
  r.expect_magic("OGFW");
  const auto c = r.u32();
  if (r.remaining() != static_cast<std::size_t>(c) * 4)
    throw ValidationError("ogfw: payload size does not match C");
  std::vector<float> values(c);
  for (auto& v : values) v = r.f32();
  return scoring::ClassifierWeights(std::move(values));
}

void write_weights(const fs::path& path, const scoring::ClassifierWeights& w) {
  write_file_bytes(path, encode_weights(w));
}

scoring::ClassifierWeights read_weights(const fs::path& path) {
  return decode_weights(read_file_bytes(path));
}

}  // namespace facmap::protocol
