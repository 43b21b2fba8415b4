#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pivotmt::utf8 {

/// Splits `text` into its code points, each returned as the byte slice that
/// encodes it. Malformed bytes come back as one-byte slices so that
/// concatenating the result always reproduces the input.
std::vector<std::string_view> split_chars(std::string_view text);

/// Decodes the first code point of a slice returned by `split_chars`.
/// Malformed input yields U+FFFD.
char32_t code_point(std::string_view ch);

std::string encode(char32_t cp);

bool is_space(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_digit(char32_t cp);

/// Word characters are everything that is neither whitespace nor punctuation.
inline bool is_word_char(char32_t cp) { return !is_space(cp) && !is_punctuation(cp); }

/// Replaces acute-accented Latin vowels with their plain forms.
std::string strip_acute_accents(std::string_view text);

}  // namespace pivotmt::utf8
