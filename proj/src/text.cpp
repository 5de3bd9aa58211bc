#include "cvner/text.hpp"

#include <algorithm>

#include "cvner/error.hpp"
#include "cvner/utf8.hpp"

namespace cvner {

namespace {

bool is_detachable(char32_t c) {
  switch (c) {
    case U',':
    case U'.':
    case U';':
    case U':':
    case U'(':
    case U')':
    case U'[':
    case U']':
    case U'"':
      return true;
    default:
      return false;
  }
}

bool is_word_char(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') ||
         c >= 0x80;
}

Token make_token(const std::u32string& cps, std::size_t a, std::size_t b) {
  return Token{utf8::encode(std::u32string_view(cps).substr(a, b - a)), a, b};
}

// Alphabetical rank of each EntityType (CITY, COUNTRY, DATE, DEGREE,
// DIPLOMA_MAJOR, JOB_TITLE, LANGUAGE, SKILL), indexed by enum value.
constexpr std::array<std::size_t, kNumEntityTypes> kAlphaRank = {0, 2, 3, 4, 5, 6, 1, 7};

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = cps.size();
  while (i < n) {
    while (i < n && utf8::is_space(cps[i])) ++i;
    if (i == n) break;
    std::size_t a = i;
    while (i < n && !utf8::is_space(cps[i])) ++i;
    std::size_t b = i;

    while (a < b && is_detachable(cps[a]) &&
           !(cps[a] == U'.' && a + 1 < b && is_word_char(cps[a + 1]))) {
      tokens.push_back(make_token(cps, a, a + 1));
      ++a;
    }
    std::vector<Token> trailing;
    while (b > a && is_detachable(cps[b - 1])) {
      trailing.push_back(make_token(cps, b - 1, b));
      --b;
    }
    if (a < b) tokens.push_back(make_token(cps, a, b));
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
  }
  return tokens;
}

// ---------------------------------------------------------------------------

std::size_t BioTag::index() const {
  switch (prefix_) {
    case Prefix::B: return kAlphaRank[index_of(type_)];
    case Prefix::I: return kNumEntityTypes + kAlphaRank[index_of(type_)];
    case Prefix::O: break;
  }
  return 2 * kNumEntityTypes;
}

std::span<const BioTag> all_bio_tags() {
  static const std::array<BioTag, BioTag::kCount> tags = [] {
    std::array<BioTag, BioTag::kCount> out{};
    for (EntityType t : kEntityTypes) {
      out[BioTag::begin(t).index()] = BioTag::begin(t);
      out[BioTag::inside(t).index()] = BioTag::inside(t);
    }
    out[BioTag::outside().index()] = BioTag::outside();
    return out;
  }();
  return tags;
}

BioTag BioTag::from_index(std::size_t index) {
  if (index >= kCount) throw Error(ErrorCode::InvalidArgument, "tag index out of range");
  return all_bio_tags()[index];
}

std::string BioTag::str() const {
  switch (prefix_) {
    case Prefix::B: return "B-" + std::string(to_string(type_));
    case Prefix::I: return "I-" + std::string(to_string(type_));
    case Prefix::O: break;
  }
  return "O";
}

BioTag BioTag::parse(std::string_view s) {
  if (s == "O") return outside();
  if (s.size() > 2 && s[1] == '-') {
    const EntityType t = parse_entity_type(s.substr(2));
    if (s[0] == 'B') return begin(t);
    if (s[0] == 'I') return inside(t);
  }
  throw Error(ErrorCode::ParseError, "invalid BIO tag '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

namespace {

// Index range [first, last] of tokens intersecting the span, if any.
std::optional<std::pair<std::size_t, std::size_t>> covered(std::span<const Token> tokens,
                                                           const EntitySpan& span) {
  auto it = std::partition_point(tokens.begin(), tokens.end(),
                                 [&](const Token& t) { return t.end <= span.start; });
  if (it == tokens.end() || it->start >= span.end) return std::nullopt;
  const std::size_t first = static_cast<std::size_t>(it - tokens.begin());
  std::size_t last = first;
  while (last + 1 < tokens.size() && tokens[last + 1].start < span.end) ++last;
  return std::make_pair(first, last);
}

}  // namespace

std::optional<EntitySpan> snap_to_tokens(std::span<const Token> tokens, const EntitySpan& span) {
  auto range = covered(tokens, span);
  if (!range) return std::nullopt;
  EntitySpan out = span;
  out.start = tokens[range->first].start;
  out.end = tokens[range->second].end;
  return out;
}

TagAlignment spans_to_tags(std::span<const Token> tokens, std::span<const EntitySpan> spans) {
  std::vector<EntitySpan> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end) {
      throw Error(ErrorCode::SpanOverlap, "overlapping spans cannot be encoded",
                  {{"start", std::to_string(sorted[i].start)},
                   {"end", std::to_string(sorted[i].end)}});
    }
  }

  TagAlignment out;
  out.tags.assign(tokens.size(), BioTag::outside());
  std::vector<bool> taken(tokens.size(), false);
  for (const auto& span : sorted) {
    auto range = covered(tokens, span);
    if (!range) {
      out.warnings.push_back({span, std::nullopt, "span covers no token; dropped"});
      continue;
    }
    auto [first, last] = *range;
    if (taken[first] || taken[last]) {
      out.warnings.push_back({span, std::nullopt, "span collides with a neighbour after snapping; dropped"});
      continue;
    }
    for (std::size_t k = first; k <= last; ++k) {
      out.tags[k] = k == first ? BioTag::begin(span.type) : BioTag::inside(span.type);
      taken[k] = true;
    }
    if (tokens[first].start != span.start || tokens[last].end != span.end) {
      EntitySpan snapped = span;
      snapped.start = tokens[first].start;
      snapped.end = tokens[last].end;
      out.warnings.push_back({span, snapped, "span boundary snapped outward to token boundaries"});
    }
  }
  return out;
}

std::vector<EntitySpan> tags_to_spans(std::span<const Token> tokens, std::span<const BioTag> tags,
                                      Provenance provenance) {
  if (tokens.size() != tags.size()) {
    throw Error(ErrorCode::InvalidArgument, "token and tag sequences differ in length",
                {{"tokens", std::to_string(tokens.size())}, {"tags", std::to_string(tags.size())}});
  }
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const BioTag tag = tags[i];
    const bool continues = open && tag.prefix() == BioTag::Prefix::I && tag.type() == open->type;
    if (continues) {
      open->end = tokens[i].end;
      continue;
    }
    if (open) {
      spans.push_back(*open);
      open.reset();
    }
    if (!tag.is_outside()) open = EntitySpan{tokens[i].start, tokens[i].end, tag.type(), provenance};
  }
  if (open) spans.push_back(*open);
  return spans;
}

}  // namespace cvner
