#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvner/corpus.hpp"

namespace cvner {

/// Scores are percentages in [0, 100].
struct PerTypeScore {
  EntityType type = EntityType::City;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;  // tp + fn
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PerTypeScore from_counts(EntityType type, std::size_t tp, std::size_t fp, std::size_t fn);

  /// A published row: only precision/recall/F1 and the gold support are
  /// known, so the confusion counts stay zero.
  static PerTypeScore published(EntityType type, double precision, double recall, double f1,
                                std::size_t support);
};

struct Aggregates {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

struct MetricsReport {
  std::array<PerTypeScore, kNumEntityTypes> per_type{};  // canonical type order
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

/// micro: F1 of summed tp/fp/fn; macro: unweighted mean of the eight F1s
/// (zero-support types count as 0); weighted: support-weighted mean of F1.
/// Requires exactly one entry per entity type, in any order.
Aggregates aggregate(std::span<const PerTypeScore> per_type);

/// Builds a report from per-type confusion counts.
MetricsReport make_report(const std::array<std::size_t, kNumEntityTypes>& tp,
                          const std::array<std::size_t, kNumEntityTypes>& fp,
                          const std::array<std::size_t, kNumEntityTypes>& fn);

/// Exact-match counts for one section: a prediction is a true positive iff a
/// gold span has identical (start, end, type), matched one-to-one.
struct SpanCounts {
  std::array<std::size_t, kNumEntityTypes> tp{};
  std::array<std::size_t, kNumEntityTypes> fp{};
  std::array<std::size_t, kNumEntityTypes> fn{};

  void add(std::span<const EntitySpan> gold, std::span<const EntitySpan> predicted);
  MetricsReport report() const { return make_report(tp, fp, fn); }
};

using Predictions = std::map<std::string, std::vector<EntitySpan>>;

/// Scores predictions against the gold sections of one split. Sections with
/// no prediction entry count as all-FN. Throws Error(UnknownSection) for ids
/// outside the split and Error(SpanOverlap)/Error(SpanOutOfBounds) for
/// invalid predicted spans.
MetricsReport score(const Dataset& gold, const SplitAssignment& assignment, Split split,
                    const Predictions& predictions);
/// Same, over every section of the dataset.
MetricsReport score(const Dataset& gold, const Predictions& predictions);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Recovers integer counts from a published (precision %, recall %, support)
/// row. Throws Error(InvalidArgument) when the recomputed values deviate
/// from the inputs by more than 2-decimal rounding allows.
Confusion reconstruct_confusion(double precision, double recall, std::size_t support);

// Predictions file: one JSON object per line {section_id, start, end, type}.
Predictions parse_predictions(std::istream& in);
Predictions parse_predictions(std::string_view text);
Predictions read_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const Predictions& predictions);
void write_predictions(const Predictions& predictions, const std::filesystem::path& path);

enum class ReportStyle { ModelComparison, PerType };

/// Half-up rounding to two decimals ("95.595" -> "95.60").
std::string format_score(double value);

std::string render_report(const MetricsReport& report, ReportStyle style,
                          std::string_view model_name = "model");
std::string render_comparison(std::span<const std::pair<std::string, MetricsReport>> rows);

nlohmann::ordered_json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace cvner
