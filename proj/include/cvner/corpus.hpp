#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cvner {

// ---------------------------------------------------------------------------
// Closed vocabularies
// ---------------------------------------------------------------------------

enum class EntityType : std::uint8_t {
  City,
  Date,
  Degree,
  DiplomaMajor,
  JobTitle,
  Language,
  Country,
  Skill,
};

inline constexpr std::size_t kNumEntityTypes = 8;

/// Canonical order (city, date, degree, diploma major, job title, language,
/// country, skill); also the row order of per-type reports.
inline constexpr std::array<EntityType, kNumEntityTypes> kEntityTypes = {
    EntityType::City,     EntityType::Date,     EntityType::Degree,  EntityType::DiplomaMajor,
    EntityType::JobTitle, EntityType::Language, EntityType::Country, EntityType::Skill,
};

std::string_view to_string(EntityType type);
EntityType parse_entity_type(std::string_view label);
inline std::size_t index_of(EntityType type) { return static_cast<std::size_t>(type); }

enum class SectionKind : std::uint8_t { Personal, Education, Experience, Language, Skill };

inline constexpr std::size_t kNumSectionKinds = 5;
inline constexpr std::array<SectionKind, kNumSectionKinds> kSectionKinds = {
    SectionKind::Personal, SectionKind::Education, SectionKind::Experience,
    SectionKind::Language, SectionKind::Skill,
};

std::string_view to_string(SectionKind kind);
SectionKind parse_section_kind(std::string_view label);

enum class Provenance : std::uint8_t { Seed, Model, Human };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view label);

enum class Split : std::uint8_t { Train, Dev, Test };

inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Dev, Split::Test};

std::string_view to_string(Split split);
/// Accepts TRAIN/DEV/TEST in any case.
Split parse_split(std::string_view name);

// ---------------------------------------------------------------------------
// Data model
// ---------------------------------------------------------------------------

/// Offsets count Unicode scalar values of the owning section's text;
/// `end` is exclusive.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityType type = EntityType::City;
  Provenance provenance = Provenance::Human;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

struct Section {
  std::string id;
  SectionKind kind = SectionKind::Personal;
  std::string text;
  std::vector<EntitySpan> spans;

  friend bool operator==(const Section&, const Section&) = default;
};

struct Document {
  std::string id;
  std::string field;
  std::vector<Section> sections;

  friend bool operator==(const Document&, const Document&) = default;
};

inline constexpr int kDatasetSchemaVersion = 1;

struct Dataset {
  int schema_version = kDatasetSchemaVersion;
  std::vector<Document> documents;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

using SplitAssignment = std::map<std::string, Split>;

using TypeCounts = std::array<std::size_t, kNumEntityTypes>;

// ---------------------------------------------------------------------------
// Validation and statistics
// ---------------------------------------------------------------------------

struct Violation {
  std::string kind;  // e.g. "span_out_of_bounds", "span_overlap"
  std::string doc_id;
  std::string section_id;
  std::optional<std::size_t> offset;
  std::string message;
};

std::vector<Violation> validate_dataset(const Dataset& dataset);

/// Span checks for one section text: bounds, emptiness, ordering, overlap.
/// Used by validation, review submission and prediction import.
std::vector<Violation> validate_spans(std::size_t text_length, std::span<const EntitySpan> spans);

TypeCounts label_histogram(const Dataset& dataset, const SplitAssignment& assignment, Split split);
TypeCounts label_histogram(const Dataset& dataset, const SplitAssignment& assignment,
                           std::string_view split_name);
TypeCounts label_histogram(const Dataset& dataset);

/// Number of documents per job field in a split.
std::map<std::string, std::size_t> field_histogram(const Dataset& dataset,
                                                   const SplitAssignment& assignment, Split split);

const Section* find_section(const Dataset& dataset, std::string_view section_id);

// ---------------------------------------------------------------------------
// Serialization (line-delimited JSON, header record first)
// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const EntitySpan& span);
EntitySpan span_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

void write_dataset(std::ostream& out, const Dataset& dataset);
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset(std::string_view text);

Dataset read_dataset(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames on success.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

void write_assignment(std::ostream& out, const SplitAssignment& assignment);
SplitAssignment parse_assignment(std::istream& in);
SplitAssignment read_assignment(const std::filesystem::path& path);
void write_assignment(const SplitAssignment& assignment, const std::filesystem::path& path);

}  // namespace cvner
