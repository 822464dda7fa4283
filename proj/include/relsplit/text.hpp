#ifndef RELSPLIT_TEXT_HPP
#define RELSPLIT_TEXT_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace relsplit::text {

/// True iff `s` is well-formed UTF-8 (no overlongs, surrogates or values
/// above U+10FFFF).
bool is_valid_utf8(std::string_view s);

/// Decodes well-formed UTF-8. Ill-formed bytes decode to U+FFFD one byte at a
/// time, so callers that need strictness should check `is_valid_utf8` first.
std::vector<char32_t> decode_utf8(std::string_view s);

void append_utf8(std::string &out, char32_t cp);
std::string encode_utf8(const std::vector<char32_t> &cps);

/// Unicode White_Space property.
bool is_space(char32_t cp);

/// Simple (one-to-one, locale-independent) Unicode lowercase mapping.
/// U+0130 maps to U+0069; there is no Turkish dotless-i special casing.
char32_t simple_lower(char32_t cp);

/// Strips leading/trailing whitespace, collapses interior whitespace runs to a
/// single ASCII space and lowercases. Returns nullopt if nothing is left.
std::optional<std::string> clean_text(std::string_view s);

} // namespace relsplit::text

#endif // RELSPLIT_TEXT_HPP
