#include "cvner/seed.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "cvner/error.hpp"
#include "cvner/text.hpp"
#include "cvner/utf8.hpp"

#ifndef CVNER_DATA_DIR
#define CVNER_DATA_DIR "data"
#endif

namespace cvner {

void Gazetteer::add(EntityType type, std::string_view term) {
  Entry e;
  e.type = type;
  for (const auto& tok : tokenize(term)) e.tokens.push_back(utf8::to_lower(tok.text));
  if (e.tokens.empty()) return;
  const std::string first = e.tokens.front();
  entries_.emplace(first, std::move(e));
}

Gazetteer Gazetteer::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, "gazetteer directory " + dir.string() + " does not exist");
  }
  Gazetteer g;
  for (EntityType t : kEntityTypes) {
    const auto path = dir / (utf8::to_lower(to_string(t)) + ".txt");
    std::ifstream in(path);
    if (!in) continue;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      g.add(t, line);
    }
  }
  return g;
}

Gazetteer Gazetteer::shipped() {
  return load_directory(std::filesystem::path(CVNER_DATA_DIR) / "gazetteers");
}

namespace {

struct Candidate {
  std::size_t first;  // token range [first, last]
  std::size_t last;
  std::size_t chars;
  EntityType type;
};

bool is_year(std::string_view s) {
  if (s.size() != 4 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  return s.substr(0, 2) == "19" || s.substr(0, 2) == "20";
}

bool is_month(std::string_view lower) {
  static constexpr std::array<std::string_view, 12> kFull = {
      "january", "february", "march", "april", "may", "june", "july",
      "august", "september", "october", "november", "december"};
  for (auto m : kFull) {
    if (lower == m || lower == m.substr(0, 3)) return true;
  }
  return lower == "sept";
}

bool is_numeric_month_year(std::string_view s) {
  if (s.size() != 7 || (s[2] != '/' && s[2] != '.')) return false;
  const bool digits = std::all_of(s.begin(), s.begin() + 2, [](char c) { return c >= '0' && c <= '9'; });
  if (!digits) return false;
  const int month = (s[0] - '0') * 10 + (s[1] - '0');
  return month >= 1 && month <= 12 && is_year(s.substr(3));
}

}  // namespace

std::vector<EntitySpan> seed_preannotate(const Section& section, const Gazetteer& gazetteer,
                                         const DatePatterns& patterns) {
  const auto tokens = tokenize(section.text);
  std::vector<std::string> lower;
  lower.reserve(tokens.size());
  for (const auto& t : tokens) lower.push_back(utf8::to_lower(t.text));

  std::vector<Candidate> cands;
  auto add = [&](std::size_t first, std::size_t last, EntityType type) {
    cands.push_back({first, last, tokens[last].end - tokens[first].start, type});
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto [lo, hi] = gazetteer.entries().equal_range(lower[i]);
    for (auto it = lo; it != hi; ++it) {
      const auto& terms = it->second.tokens;
      if (i + terms.size() > tokens.size()) continue;
      if (std::equal(terms.begin(), terms.end(), lower.begin() + static_cast<std::ptrdiff_t>(i))) {
        add(i, i + terms.size() - 1, it->second.type);
      }
    }
    if (patterns.month_year && is_month(lower[i]) && i + 1 < tokens.size() && is_year(lower[i + 1])) {
      add(i, i + 1, EntityType::Date);
    }
    if (patterns.year && is_year(lower[i])) add(i, i, EntityType::Date);
    if (patterns.numeric && is_numeric_month_year(lower[i])) add(i, i, EntityType::Date);
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.chars != b.chars) return a.chars > b.chars;
    if (a.first != b.first) return a.first < b.first;
    return a.type < b.type;
  });
  std::vector<bool> taken(tokens.size(), false);
  std::vector<EntitySpan> out;
  for (const auto& c : cands) {
    bool free = true;
    for (std::size_t k = c.first; k <= c.last && free; ++k) free = !taken[k];
    if (!free) continue;
    for (std::size_t k = c.first; k <= c.last; ++k) taken[k] = true;
    out.push_back({tokens[c.first].start, tokens[c.last].end, c.type, Provenance::Seed});
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cvner
