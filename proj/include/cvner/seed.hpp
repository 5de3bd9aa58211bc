#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cvner/corpus.hpp"

namespace cvner {

/// Case-insensitive term lists per entity type, matched on token boundaries.
class Gazetteer {
 public:
  void add(EntityType type, std::string_view term);

  /// Loads `<type>.txt` files (city.txt, country.txt, language.txt,
  /// degree.txt, skill.txt, ... named after the lower-cased entity type),
  /// one UTF-8 term per line. Blank lines and lines starting with '#' are
  /// ignored. Missing files are skipped.
  static Gazetteer load_directory(const std::filesystem::path& dir);

  /// Lists shipped with the project (data/gazetteers).
  static Gazetteer shipped();

  struct Entry {
    std::vector<std::string> tokens;  // lower-cased
    EntityType type;
  };

  /// Entries keyed by their first lower-cased token.
  const std::multimap<std::string, Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::multimap<std::string, Entry> entries_;
};

/// Built-in date patterns:
///   month_year  "June 2019", "Sep 2017" (full or abbreviated month, then a year)
///   year        a bare four-digit year 1900-2099
///   numeric     "06/2019" or "06.2019" (month 01-12, then a year)
/// A range "2018 - 2020" therefore yields two DATE spans.
struct DatePatterns {
  bool month_year = true;
  bool year = true;
  bool numeric = true;
};

/// Rule-based pre-annotation: gazetteer hits and date patterns, conflicts
/// resolved longest match first, then leftmost. Spans carry provenance SEED.
std::vector<EntitySpan> seed_preannotate(const Section& section, const Gazetteer& gazetteer,
                                         const DatePatterns& patterns = {});

}  // namespace cvner
