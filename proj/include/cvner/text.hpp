#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvner/corpus.hpp"

namespace cvner {

struct Token {
  std::string text;
  std::size_t start = 0;  // scalar-value offset
  std::size_t end = 0;    // exclusive

  friend bool operator==(const Token&, const Token&) = default;
};

/// Whitespace split, then leading/trailing characters from , . ; : ( ) [ ] "
/// are detached as one-character tokens. A leading '.' directly followed by
/// a letter or digit stays attached (".NET"); trailing '+' and '#' are never
/// detached ("C++", "C#").
std::vector<Token> tokenize(std::string_view text);

/// One of O, B-X, I-X over the eight entity types.
///
/// index() orders tags by their string form ("B-CITY" < "B-COUNTRY" < ... <
/// "I-SKILL" < "O"), so "smallest index" and "lexicographically smallest tag"
/// coincide wherever ties are broken.
class BioTag {
 public:
  enum class Prefix : std::uint8_t { B, I, O };

  static constexpr std::size_t kCount = 2 * kNumEntityTypes + 1;

  constexpr BioTag() = default;
  static constexpr BioTag outside() { return BioTag(); }
  static constexpr BioTag begin(EntityType t) { return BioTag(Prefix::B, t); }
  static constexpr BioTag inside(EntityType t) { return BioTag(Prefix::I, t); }

  static BioTag from_index(std::size_t index);
  static BioTag parse(std::string_view s);

  constexpr Prefix prefix() const { return prefix_; }
  constexpr EntityType type() const { return type_; }
  constexpr bool is_outside() const { return prefix_ == Prefix::O; }

  std::size_t index() const;
  std::string str() const;

  friend constexpr bool operator==(const BioTag& a, const BioTag& b) {
    return a.prefix_ == b.prefix_ && (a.prefix_ == Prefix::O || a.type_ == b.type_);
  }

 private:
  constexpr BioTag(Prefix p, EntityType t) : prefix_(p), type_(t) {}

  Prefix prefix_ = Prefix::O;
  EntityType type_ = EntityType::City;
};

/// All 17 tags in index order.
std::span<const BioTag> all_bio_tags();

struct AlignmentWarning {
  EntitySpan original;
  std::optional<EntitySpan> snapped;  // empty when the span was dropped
  std::string message;
};

struct TagAlignment {
  std::vector<BioTag> tags;
  std::vector<AlignmentWarning> warnings;
};

/// Encodes spans as one tag per token. Misaligned boundaries are snapped
/// outward to the enclosing tokens and reported. Throws Error(SpanOverlap)
/// if the input spans overlap.
TagAlignment spans_to_tags(std::span<const Token> tokens, std::span<const EntitySpan> spans);

/// Decodes maximal B/I runs; an orphan I-X opens a new span, and an I-run
/// changing type starts a new span. Throws on length mismatch.
std::vector<EntitySpan> tags_to_spans(std::span<const Token> tokens, std::span<const BioTag> tags,
                                      Provenance provenance = Provenance::Model);

/// Outward snap of one span to token boundaries; empty if it touches no token.
std::optional<EntitySpan> snap_to_tokens(std::span<const Token> tokens, const EntitySpan& span);

}  // namespace cvner
