#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facmap/pipeline.hpp"

namespace facmap::evaluation {

enum class Label { negative, positive };
enum class Split { train, validation, test };
/// Tags for difficult negatives; only meaningful on negative examples.
enum class NegativeCategory { random, urban, well_pad, cropland, forest, snow, other };

std::string to_string(Label v);
std::string to_string(Split v);
std::string to_string(NegativeCategory v);
Label parse_label(const std::string& s);
Split parse_split(const std::string& s);
NegativeCategory parse_negative_category(const std::string& s);

struct LabeledScore {
  std::string id;
  Split split = Split::train;
  Label label = Label::negative;
  double probability = 0.0;
  std::optional<NegativeCategory> negative_category;
};

/// Checks probability range and that categories only tag negatives.
void validate(const LabeledScore& s);

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when precision (tp + fp == 0) or recall (tp + fn == 0) was defined as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

/// Prediction is positive when probability >= threshold.
ConfusionCounts confusion(std::span<const LabeledScore> scores, double threshold);

/// Throws DomainError when all counts are zero.
MetricsReport compute_metrics(const ConfusionCounts& c);

nlohmann::ordered_json metrics_to_json(const ConfusionCounts& c, const MetricsReport& m,
                                       double threshold);

struct OperatingPointChoice {
  pipeline::OperatingPoint op{0.0};
  double precision = 0.0;
  double recall = 0.0;
  ConfusionCounts counts;
};

/// Highest precision subject to recall 1.0 over the candidate thresholds
/// {0} U {observed probabilities}; ties go to the larger threshold. Callers
/// pass the validation split. Throws DomainError without positive examples.
OperatingPointChoice select_operating_point(std::span<const LabeledScore> scores);

/// Index of the lowest validation loss, earliest on ties. Throws DomainError when empty.
std::size_t select_checkpoint(std::span<const double> validation_losses);

struct SplitCounts {
  std::uint64_t positive = 0;
  std::uint64_t negative = 0;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct SplitSummary {
  std::array<SplitCounts, 3> counts{};  // indexed by Split

  const SplitCounts& operator[](Split s) const { return counts[static_cast<int>(s)]; }
  SplitCounts& operator[](Split s) { return counts[static_cast<int>(s)]; }
  std::uint64_t total() const;
  friend bool operator==(const SplitSummary&, const SplitSummary&) = default;
};

SplitSummary split_summary(std::span<const LabeledScore> scores);

/// Human-readable mismatches between an observed and an expected summary;
/// empty when they agree.
std::vector<std::string> compare_splits(const SplitSummary& observed, const SplitSummary& expected);

/// The dataset composition used for model development: train 127/5525,
/// validation 13/693, test 9/697 (positive/negative).
SplitSummary reference_split_counts();

std::vector<LabeledScore> filter_split(std::span<const LabeledScore> scores, Split split);

/// CSV with header id,split,label,probability,negative_category.
std::vector<LabeledScore> read_labeled_scores(const std::filesystem::path& path);
void write_labeled_scores(const std::filesystem::path& path, std::span<const LabeledScore> scores);

}  // namespace facmap::evaluation
