#pragma once

#include <string>
#include <string_view>

namespace cvner::utf8 {

/// Decodes UTF-8 into Unicode scalar values. Throws Error(ParseError) on
/// malformed input.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

/// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view text);

/// Substring by scalar-value offsets [start, end).
std::string substr(std::string_view text, std::size_t start, std::size_t end);

bool is_space(char32_t cp);

/// Lower-casing for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic;
/// other scalar values pass through. Dotted capital I maps to plain i.
char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view text);

bool is_upper(char32_t cp);
bool is_lower(char32_t cp);

}  // namespace cvner::utf8
