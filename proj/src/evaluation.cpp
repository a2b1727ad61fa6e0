#include "facmap/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "facmap/csv.hpp"
#include "facmap/errors.hpp"

namespace facmap::evaluation {

namespace {

constexpr std::array<const char*, 7> kCategoryNames{"random",   "urban",  "well_pad", "cropland",
                                                    "forest",   "snow",   "other"};

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::string to_string(Label v) { return v == Label::positive ? "positive" : "negative"; }

std::string to_string(Split v) {
  switch (v) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::string to_string(NegativeCategory v) { return kCategoryNames[static_cast<int>(v)]; }

Label parse_label(const std::string& s) {
  if (s == "positive" || s == "1") return Label::positive;
  if (s == "negative" || s == "0") return Label::negative;
  throw ValidationError("unknown label '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "valid" || s == "val") return Split::validation;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + s + "'");
}

NegativeCategory parse_negative_category(const std::string& s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
    if (s == kCategoryNames[i]) return static_cast<NegativeCategory>(i);
  throw ValidationError("unknown negative category '" + s + "'");
}

void validate(const LabeledScore& s) {
  if (!(s.probability >= 0.0 && s.probability <= 1.0))
    throw ValidationError("example '" + s.id + "': probability outside [0, 1]");
  if (s.negative_category && s.label == Label::positive)
    throw ValidationError("example '" + s.id + "': negative_category on a positive example");
}

ConfusionCounts confusion(std::span<const LabeledScore> scores, double threshold) {
  ConfusionCounts c;
  for (const auto& s : scores) {
    const bool predicted = s.probability >= threshold;
    if (s.label == Label::positive)
      (predicted ? c.tp : c.fn)++;
    else
      (predicted ? c.fp : c.tn)++;
  }
  return c;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw DomainError("compute_metrics: all confusion counts are zero");
  MetricsReport m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.precision_undefined = c.tp + c.fp == 0;
  m.recall_undefined = c.tp + c.fn == 0;
  const double denom = m.precision + m.recall;
  m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  return m;
}

nlohmann::ordered_json metrics_to_json(const ConfusionCounts& c, const MetricsReport& m,
                                       double threshold) {
  nlohmann::ordered_json flags = nlohmann::ordered_json::array();
  if (m.precision_undefined) flags.push_back("precision_undefined");
  if (m.recall_undefined) flags.push_back("recall_undefined");
  return {{"threshold", threshold},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}},
          {"flags", flags}};
}

OperatingPointChoice select_operating_point(std::span<const LabeledScore> scores) {
  std::vector<const LabeledScore*> order;
  order.reserve(scores.size());
  std::uint64_t positives = 0, negatives = 0;
  for (const auto& s : scores) {
    validate(s);
    order.push_back(&s);
    (s.label == Label::positive ? positives : negatives)++;
  }
  if (positives == 0) throw DomainError("select_operating_point: no positive examples");

  // Sweep thresholds from high to low. After consuming every example with
  // probability >= t, the running counts are the confusion at threshold t.
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->probability > b->probability; });

  bool found = false;
  double best_t = 0.0;
  std::uint64_t best_tp = 0, best_fp = 0;
  auto consider = [&](double t, std::uint64_t tp, std::uint64_t fp) {
    if (tp != positives) return;  // recall must be exactly 1
    // precision tp/(tp+fp) compared exactly by cross-multiplication; tp > 0 here.
    const auto lhs = static_cast<unsigned __int128>(tp) * (best_tp + best_fp);
    const auto rhs = static_cast<unsigned __int128>(best_tp) * (tp + fp);
    if (!found || lhs > rhs || (lhs == rhs && t > best_t)) {
      found = true;
      best_t = t;
      best_tp = tp;
      best_fp = fp;
    }
  };

  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = order[i]->probability;
    while (i < order.size() && order[i]->probability == t) {
      (order[i]->label == Label::positive ? tp : fp)++;
      ++i;
    }
    consider(t, tp, fp);
  }
  consider(0.0, positives, negatives);

  OperatingPointChoice choice;
  choice.op = pipeline::OperatingPoint(best_t);
  choice.counts = {best_tp, best_fp, 0, negatives - best_fp};
  choice.precision = ratio(best_tp, best_tp + best_fp);
  choice.recall = 1.0;
  return choice;
}

std::size_t select_checkpoint(std::span<const double> validation_losses) {
  if (validation_losses.empty()) throw DomainError("select_checkpoint: no validation losses");
  // min_element returns the first minimum, so ties resolve to the earliest epoch.
  return static_cast<std::size_t>(
      std::min_element(validation_losses.begin(), validation_losses.end()) -
      validation_losses.begin());
}

std::uint64_t SplitSummary::total() const {
  std::uint64_t n = 0;
  for (const auto& c : counts) n += c.positive + c.negative;
  return n;
}

SplitSummary split_summary(std::span<const LabeledScore> scores) {
  SplitSummary s;
  for (const auto& x : scores) (x.label == Label::positive ? s[x.split].positive : s[x.split].negative)++;
  return s;
}

std::vector<std::string> compare_splits(const SplitSummary& observed, const SplitSummary& expected) {
  std::vector<std::string> issues;
  for (auto split : {Split::train, Split::validation, Split::test}) {
    const auto& o = observed[split];
    const auto& e = expected[split];
    if (o.positive != e.positive)
      issues.push_back(to_string(split) + " positives: " + std::to_string(o.positive) +
                       " (expected " + std::to_string(e.positive) + ")");
    if (o.negative != e.negative)
      issues.push_back(to_string(split) + " negatives: " + std::to_string(o.negative) +
                       " (expected " + std::to_string(e.negative) + ")");
  }
  return issues;
}

SplitSummary reference_split_counts() {
  SplitSummary s;
  s[Split::train] = {127, 5525};
  s[Split::validation] = {13, 693};
  s[Split::test] = {9, 697};
  return s;
}

std::vector<LabeledScore> filter_split(std::span<const LabeledScore> scores, Split split) {
  std::vector<LabeledScore> out;
  std::copy_if(scores.begin(), scores.end(), std::back_inserter(out),
               [&](const LabeledScore& s) { return s.split == split; });
  return out;
}

std::vector<LabeledScore> read_labeled_scores(const std::filesystem::path& path) {
  const auto table =
      csv::Table::read_file(path, {"id", "split", "label", "probability", "negative_category"});
  std::vector<LabeledScore> out;
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(table.line_of(i));
    try {
      LabeledScore s;
      s.id = table.cell(i, "id");
      s.split = parse_split(table.cell(i, "split"));
      s.label = parse_label(table.cell(i, "label"));
      s.probability = csv::parse_double(table.cell(i, "probability"), "probability");
      if (const auto& cat = table.cell(i, "negative_category"); !cat.empty())
        s.negative_category = parse_negative_category(cat);
      validate(s);
      out.push_back(std::move(s));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return out;
}

void write_labeled_scores(const std::filesystem::path& path, std::span<const LabeledScore> scores) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,split,label,probability,negative_category\n";
  for (const auto& s : scores)
    csv::write_row(out, {s.id, to_string(s.split), to_string(s.label),
                         csv::format_double(s.probability),
                         s.negative_category ? to_string(*s.negative_category) : ""});
}

}  // namespace facmap::evaluation
