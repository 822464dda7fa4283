#include "relsplit/text.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace relsplit::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

constexpr std::pair<char32_t, char32_t> kLowerTable[] = {
#include "unicode_lower_table.inc"
};

// Length of the sequence starting at s[i] if it is well formed, else 0.
std::size_t sequence_length(std::string_view s, std::size_t i, char32_t &cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > s.size())
    return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80)
      return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
    return 0;
  return len;
}

} // namespace

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  char32_t cp = 0;
  while (i < s.size()) {
    const std::size_t len = sequence_length(s, i, cp);
    if (len == 0)
      return false;
    i += len;
  }
  return true;
}

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  char32_t cp = 0;
  while (i < s.size()) {
    const std::size_t len = sequence_length(s, i, cp);
    if (len == 0) {
      out.push_back(kReplacement);
      ++i;
    } else {
      out.push_back(cp);
      i += len;
    }
  }
  return out;
}

void append_utf8(std::string &out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(const std::vector<char32_t> &cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps)
    append_utf8(out, cp);
  return out;
}

bool is_space(char32_t cp) {
  switch (cp) {
  case 0x0009: case 0x000A: case 0x000B: case 0x000C: case 0x000D:
  case 0x0020: case 0x0085: case 0x00A0: case 0x1680:
  case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
    return true;
  default:
    return cp >= 0x2000 && cp <= 0x200A;
  }
}

char32_t simple_lower(char32_t cp) {
  if (cp < 0x80)
    return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  const auto *first = std::begin(kLowerTable);
  const auto *last = std::end(kLowerTable);
  const auto *it = std::lower_bound(
      first, last, cp, [](const auto &entry, char32_t v) { return entry.first < v; });
  return (it != last && it->first == cp) ? it->second : cp;
}

std::optional<std::string> clean_text(std::string_view s) {
  // strip, collapse, lowercase: done in one pass over code points.
  const auto cps = decode_utf8(s);
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, simple_lower(cp));
  }
  if (out.empty())
    return std::nullopt;
  return out;
}

} // namespace relsplit::text
