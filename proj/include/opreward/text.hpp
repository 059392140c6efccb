#pragma once

#include <string>
#include <string_view>
#include <vector>

// UTF-8 text helpers shared by the parser, masking and dedup code. All
// comparisons in the engine go through nfc() first.
namespace opreward::text {

std::string nfc(std::string_view s);
std::string lower(std::string_view s);

std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

// NFC + trim + single-space runs.
std::string normalize_line(std::string_view s);

// NFC + lowercase + collapse_whitespace; the key used for duplicate checks.
std::string comparison_key(std::string_view s);

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last byte
};

// Byte spans of whitespace-delimited tokens.
std::vector<TokenSpan> whitespace_tokens(std::string_view s);

// Drops leading and trailing Unicode punctuation.
std::string strip_punctuation(std::string_view token);

// Lowercased, punctuation-stripped form used when comparing tokens.
std::string token_key(std::string_view token);

std::size_t codepoint_count(std::string_view s);

// Word set used by the Jaccard near-duplicate check.
std::vector<std::string> word_set(std::string_view s);
// 0 when both sets are empty.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace opreward::text
