#include "cvner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cvner/error.hpp"
#include "cvner/io.hpp"
#include "cvner/utf8.hpp"

namespace cvner {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kNumEntityTypes> kEntityNames = {
    "CITY", "DATE", "DEGREE", "DIPLOMA_MAJOR", "JOB_TITLE", "LANGUAGE", "COUNTRY", "SKILL",
};
constexpr std::array<std::string_view, kNumSectionKinds> kKindNames = {
    "PERSONAL", "EDUCATION", "EXPERIENCE", "LANGUAGE", "SKILL",
};
constexpr std::array<std::string_view, 3> kProvenanceNames = {"SEED", "MODEL", "HUMAN"};
constexpr std::array<std::string_view, 3> kSplitNames = {"TRAIN", "DEV", "TEST"};

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

}  // namespace

std::string_view to_string(EntityType type) { return kEntityNames[index_of(type)]; }

EntityType parse_entity_type(std::string_view label) {
  for (std::size_t i = 0; i < kEntityNames.size(); ++i) {
    if (kEntityNames[i] == label) return static_cast<EntityType>(i);
  }
  throw Error(ErrorCode::UnknownEntityType, "unknown entity type '" + std::string(label) + "'",
              {{"type", std::string(label)}});
}

std::string_view to_string(SectionKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

SectionKind parse_section_kind(std::string_view label) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == label) return static_cast<SectionKind>(i);
  }
  throw Error(ErrorCode::ParseError, "unknown section kind '" + std::string(label) + "'");
}

std::string_view to_string(Provenance p) { return kProvenanceNames[static_cast<std::size_t>(p)]; }

Provenance parse_provenance(std::string_view label) {
  for (std::size_t i = 0; i < kProvenanceNames.size(); ++i) {
    if (kProvenanceNames[i] == label) return static_cast<Provenance>(i);
  }
  throw Error(ErrorCode::ParseError, "unknown provenance '" + std::string(label) + "'");
}

std::string_view to_string(Split split) { return kSplitNames[static_cast<std::size_t>(split)]; }

Split parse_split(std::string_view name) {
  const std::string u = upper(name);
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == u) return static_cast<Split>(i);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(name) + "'",
              {{"split", std::string(name)}});
}

// ---------------------------------------------------------------------------

std::vector<Violation> validate_spans(std::size_t text_length, std::span<const EntitySpan> spans) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start >= s.end) {
      out.push_back({"span_empty", {}, {}, s.start,
                     "span [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") is empty"});
    }
    if (s.end > text_length) {
      out.push_back({"span_out_of_bounds", {}, {}, s.end,
                     "span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                         ") exceeds text length " + std::to_string(text_length)});
    }
    if (i > 0) {
      const auto& p = spans[i - 1];
      if (s.start < p.start) {
        out.push_back({"span_unsorted", {}, {}, s.start, "spans are not sorted by start"});
      }
      if (s.start < p.end && p.start < s.end) {
        out.push_back({"span_overlap", {}, {}, s.start,
                       "span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                           ") overlaps [" + std::to_string(p.start) + "," +
                           std::to_string(p.end) + ")"});
      }
    }
  }
  return out;
}

std::vector<Violation> validate_dataset(const Dataset& dataset) {
  std::vector<Violation> out;
  std::set<std::string> doc_ids;
  std::set<std::string> section_ids;
  for (const auto& doc : dataset.documents) {
    if (!doc_ids.insert(doc.id).second) {
      out.push_back({"duplicate_doc_id", doc.id, {}, {}, "duplicate doc_id"});
    }
    if (doc.sections.size() > kNumSectionKinds) {
      out.push_back({"too_many_sections", doc.id, {}, {}, "document has more than 5 sections"});
    }
    std::set<SectionKind> kinds;
    for (const auto& section : doc.sections) {
      if (!section_ids.insert(section.id).second) {
        out.push_back({"duplicate_section_id", doc.id, section.id, {}, "duplicate section_id"});
      }
      if (!kinds.insert(section.kind).second) {
        out.push_back({"duplicate_section_kind", doc.id, section.id, {},
                       "section kind " + std::string(to_string(section.kind)) + " repeated"});
      }
      std::size_t length;
      try {
        length = utf8::length(section.text);
      } catch (const Error&) {
        out.push_back({"invalid_utf8", doc.id, section.id, {}, "section text is not valid UTF-8"});
        continue;
      }
      for (auto v : validate_spans(length, section.spans)) {
        v.doc_id = doc.id;
        v.section_id = section.id;
        out.push_back(std::move(v));
      }
    }
  }
  return out;
}

TypeCounts label_histogram(const Dataset& dataset, const SplitAssignment& assignment, Split split) {
  TypeCounts counts{};
  for (const auto& doc : dataset.documents) {
    auto it = assignment.find(doc.id);
    if (it == assignment.end()) {
      throw Error(ErrorCode::InvalidArgument, "assignment does not cover document " + doc.id,
                  {{"doc_id", doc.id}});
    }
    if (it->second != split) continue;
    for (const auto& section : doc.sections) {
      for (const auto& span : section.spans) ++counts[index_of(span.type)];
    }
  }
  return counts;
}

TypeCounts label_histogram(const Dataset& dataset, const SplitAssignment& assignment,
                           std::string_view split_name) {
  return label_histogram(dataset, assignment, parse_split(split_name));
}

TypeCounts label_histogram(const Dataset& dataset) {
  TypeCounts counts{};
  for (const auto& doc : dataset.documents) {
    for (const auto& section : doc.sections) {
      for (const auto& span : section.spans) ++counts[index_of(span.type)];
    }
  }
  return counts;
}

std::map<std::string, std::size_t> field_histogram(const Dataset& dataset,
                                                   const SplitAssignment& assignment, Split split) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : dataset.documents) {
    auto it = assignment.find(doc.id);
    if (it != assignment.end() && it->second == split) ++counts[doc.field];
  }
  return counts;
}

const Section* find_section(const Dataset& dataset, std::string_view section_id) {
  for (const auto& doc : dataset.documents) {
    for (const auto& section : doc.sections) {
      if (section.id == section_id) return &section;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::ParseError, std::string("missing field \"") + key + "\"",
                {{"field", key}});
  }
  return j.at(key);
}

std::string require_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::ParseError, std::string("field \"") + key + "\" must be a string",
                {{"field", key}});
  }
  return v.get<std::string>();
}

std::size_t require_offset(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::ParseError,
                std::string("field \"") + key + "\" must be a non-negative integer",
                {{"field", key}});
  }
  return v.get<std::size_t>();
}

template <typename Fn>
auto at_line(std::size_t line, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    auto ctx = e.context();
    ctx["line"] = std::to_string(line);
    throw Error(e.code(), "line " + std::to_string(line) + ": " + e.what(), std::move(ctx));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + e.what(),
                {{"line", std::to_string(line)}});
  }
}

}  // namespace

ordered_json to_json(const EntitySpan& span) {
  ordered_json j;
  j["start"] = span.start;
  j["end"] = span.end;
  j["type"] = to_string(span.type);
  j["provenance"] = to_string(span.provenance);
  return j;
}

EntitySpan span_from_json(const json& j) {
  EntitySpan span;
  span.start = require_offset(j, "start");
  span.end = require_offset(j, "end");
  span.type = parse_entity_type(require_string(j, "type"));
  if (j.contains("provenance")) span.provenance = parse_provenance(require_string(j, "provenance"));
  return span;
}

ordered_json to_json(const Document& doc) {
  ordered_json j;
  j["doc_id"] = doc.id;
  j["field"] = doc.field;
  auto sections = ordered_json::array();
  for (const auto& section : doc.sections) {
    ordered_json s;
    s["section_id"] = section.id;
    s["kind"] = to_string(section.kind);
    s["text"] = section.text;
    auto spans = ordered_json::array();
    for (const auto& span : section.spans) spans.push_back(to_json(span));
    s["spans"] = std::move(spans);
    sections.push_back(std::move(s));
  }
  j["sections"] = std::move(sections);
  return j;
}

Document document_from_json(const json& j) {
  Document doc;
  doc.id = require_string(j, "doc_id");
  doc.field = require_string(j, "field");
  const auto& sections = require(j, "sections");
  if (!sections.is_array()) throw Error(ErrorCode::ParseError, "\"sections\" must be an array");
  for (const auto& s : sections) {
    Section section;
    section.id = require_string(s, "section_id");
    section.kind = parse_section_kind(require_string(s, "kind"));
    section.text = require_string(s, "text");
    const auto& spans = require(s, "spans");
    if (!spans.is_array()) throw Error(ErrorCode::ParseError, "\"spans\" must be an array");
    for (const auto& sp : spans) section.spans.push_back(span_from_json(sp));
    doc.sections.push_back(std::move(section));
  }
  return doc;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  ordered_json header;
  header["schema_version"] = dataset.schema_version;
  out << header.dump() << '\n';
  for (const auto& doc : dataset.documents) out << to_json(doc).dump() << '\n';
}

std::string serialize_dataset(const Dataset& dataset) {
  std::ostringstream ss;
  write_dataset(ss, dataset);
  return ss.str();
}

Dataset parse_dataset(std::istream& in) {
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    at_line(line_no, [&] {
      const json j = json::parse(line);
      if (!have_header) {
        const auto& v = require(j, "schema_version");
        if (!v.is_number_integer()) {
          throw Error(ErrorCode::ParseError, "schema_version must be an integer");
        }
        const int version = v.get<int>();
        if (version != kDatasetSchemaVersion) {
          throw Error(ErrorCode::UnsupportedVersion,
                      "unsupported schema_version " + std::to_string(version),
                      {{"schema_version", std::to_string(version)}});
        }
        dataset.schema_version = version;
        have_header = true;
      } else {
        dataset.documents.push_back(document_from_json(j));
      }
      return 0;
    });
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "missing schema_version header record");
  return dataset;
}

Dataset parse_dataset(std::string_view text) {
  std::istringstream ss{std::string(text)};
  return parse_dataset(ss);
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_dataset(in);
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

void write_assignment(std::ostream& out, const SplitAssignment& assignment) {
  for (const auto& [doc_id, split] : assignment) {
    ordered_json j;
    j["doc_id"] = doc_id;
    j["split"] = to_string(split);
    out << j.dump() << '\n';
  }
}

SplitAssignment parse_assignment(std::istream& in) {
  SplitAssignment assignment;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    at_line(line_no, [&] {
      const json j = json::parse(line);
      const auto doc_id = require_string(j, "doc_id");
      const auto split = parse_split(require_string(j, "split"));
      if (!assignment.emplace(doc_id, split).second) {
        throw Error(ErrorCode::ParseError, "doc_id " + doc_id + " assigned twice");
      }
      return 0;
    });
  }
  return assignment;
}

SplitAssignment read_assignment(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_assignment(in);
}

void write_assignment(const SplitAssignment& assignment, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_assignment(ss, assignment);
  write_file_atomic(path, ss.str());
}

}  // namespace cvner
