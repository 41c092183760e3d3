#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpr {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

// Word tokens: runs of alphanumerics; bytes >= 0x80 count as word characters
// so UTF-8 text splits on ASCII punctuation/whitespace only. Lowercased.
std::vector<std::string> tokenize_words(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Lowercased, whitespace-collapsed form used for substring checks
// (statement endpoint checks, question leakage checks).
std::string canonical_text(std::string_view s);
bool contains_canonical(std::string_view haystack, std::string_view needle);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL);

// Leading numeric value of a string like "5400 (USD)" or "-3.25"; empty if
// the string does not start with a number.
std::optional<double> leading_number(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

}  // namespace mpr
