#include "pivotmt/utf8.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace pivotmt::utf8 {

namespace {

std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 0;
}

bool is_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

using Range = std::pair<char32_t, char32_t>;

// Unicode general categories Pc, Pd, Ps, Pe, Pi, Pf, Po (common blocks).
constexpr std::array kPunctuation = {
    Range{0x21, 0x23},     Range{0x25, 0x2A},     Range{0x2C, 0x2F},     Range{0x3A, 0x3B},
    Range{0x3F, 0x40},     Range{0x5B, 0x5D},     Range{0x5F, 0x5F},     Range{0x7B, 0x7B},
    Range{0x7D, 0x7D},     Range{0xA1, 0xA1},     Range{0xA7, 0xA7},     Range{0xAB, 0xAB},
    Range{0xB6, 0xB7},     Range{0xBB, 0xBB},     Range{0xBF, 0xBF},     Range{0x37E, 0x37E},
    Range{0x387, 0x387},   Range{0x2010, 0x2027}, Range{0x2030, 0x2043}, Range{0x2045, 0x2051},
    Range{0x2053, 0x205E}, Range{0x207D, 0x207E}, Range{0x208D, 0x208E}, Range{0x2308, 0x230B},
    Range{0x2329, 0x232A}, Range{0x2E00, 0x2E4F}, Range{0x3001, 0x3003}, Range{0x3008, 0x3011},
    Range{0x3014, 0x301F}, Range{0xFE10, 0xFE19}, Range{0xFE30, 0xFE52}, Range{0xFE54, 0xFE61},
    Range{0xFE63, 0xFE63}, Range{0xFE68, 0xFE68}, Range{0xFE6A, 0xFE6B}, Range{0xFF01, 0xFF03},
    Range{0xFF05, 0xFF0A}, Range{0xFF0C, 0xFF0F}, Range{0xFF1A, 0xFF1B}, Range{0xFF1F, 0xFF20},
    Range{0xFF3B, 0xFF3D}, Range{0xFF3F, 0xFF3F}, Range{0xFF5B, 0xFF5B}, Range{0xFF5D, 0xFF5D},
    Range{0xFF5F, 0xFF65},
};

constexpr std::array kSpace = {
    Range{0x09, 0x0D},     Range{0x20, 0x20},     Range{0x85, 0x85},     Range{0xA0, 0xA0},
    Range{0x1680, 0x1680}, Range{0x2000, 0x200A}, Range{0x2028, 0x2029}, Range{0x202F, 0x202F},
    Range{0x205F, 0x205F}, Range{0x3000, 0x3000},
};

template <std::size_t N>
bool in_ranges(const std::array<Range, N>& ranges, char32_t cp) {
  auto it = std::upper_bound(ranges.begin(), ranges.end(), cp,
                             [](char32_t value, const Range& r) { return value < r.first; });
  if (it == ranges.begin()) return false;
  --it;
  return cp >= it->first && cp <= it->second;
}

}  // namespace

std::vector<std::string_view> split_chars(std::string_view text) {
  std::vector<std::string_view> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = sequence_length(static_cast<unsigned char>(text[i]));
    bool ok = len > 0 && i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k)
      ok = is_continuation(static_cast<unsigned char>(text[i + k]));
    if (!ok) len = 1;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

char32_t code_point(std::string_view ch) {
  if (ch.empty()) return 0xFFFD;
  const auto lead = static_cast<unsigned char>(ch[0]);
  const std::size_t len = sequence_length(lead);
  if (len == 0 || len != ch.size()) return 0xFFFD;
  if (len == 1) return lead;
  char32_t cp = lead & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(ch[k]) & 0x3F);
  return cp;
}

std::string encode(char32_t cp) {
  std::string out;
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
  return out;
}

bool is_space(char32_t cp) { return in_ranges(kSpace, cp); }

bool is_punctuation(char32_t cp) { return in_ranges(kPunctuation, cp); }

bool is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

std::string strip_acute_accents(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (auto ch : split_chars(text)) {
    switch (code_point(ch)) {
      case U'á': out += 'a'; break;
      case U'é': out += 'e'; break;
      case U'í': out += 'i'; break;
      case U'ó': out += 'o'; break;
      case U'ú': out += 'u'; break;
      case U'Á': out += 'A'; break;
      case U'É': out += 'E'; break;
      case U'Í': out += 'I'; break;
      case U'Ó': out += 'O'; break;
      case U'Ú': out += 'U'; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace pivotmt::utf8
