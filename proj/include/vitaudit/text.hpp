#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vitaudit::text {

/// True when the code point is Unicode White_Space.
bool is_space(char32_t cp);

/// Splits UTF-8 text on runs of Unicode whitespace. Punctuation stays
/// attached to the adjacent word.
std::vector<std::string_view> split_words(std::string_view s);

/// Collapses whitespace runs to a single ASCII space and trims both ends.
std::string normalize_whitespace(std::string_view s);

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);

/// At most `max_chars` code points from the start of `s`, never splitting a
/// multi-byte sequence.
std::string utf8_prefix(std::string_view s, std::size_t max_chars);

/// 64-bit FNV-1a. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t v);

}  // namespace vitaudit::text
