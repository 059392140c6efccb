#include "opreward/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <stdexcept>

namespace opreward::text {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

icu::UnicodeString to_unicode(std::string_view s) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

}  // namespace

std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString in = to_unicode(s);
  if (normalizer->isNormalized(in, status) && U_SUCCESS(status)) return to_utf8(in);
  status = U_ZERO_ERROR;
  icu::UnicodeString out = normalizer->normalize(in, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  return to_utf8(out);
}

std::string lower(std::string_view s) {
  icu::UnicodeString u = to_unicode(s);
  u.toLower(icu::Locale::getRoot());
  return to_utf8(u);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_line(std::string_view s) { return collapse_whitespace(nfc(s)); }

std::string comparison_key(std::string_view s) { return collapse_whitespace(lower(nfc(s))); }

std::vector<TokenSpan> whitespace_tokens(std::string_view s) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size()) break;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    spans.push_back({start, i});
  }
  return spans;
}

std::string strip_punctuation(std::string_view token) {
  icu::UnicodeString u = to_unicode(token);
  int32_t begin = 0;
  int32_t end = u.length();
  while (begin < end) {
    UChar32 c = u.char32At(begin);
    if (!u_ispunct(c)) break;
    begin += U16_LENGTH(c);
  }
  while (end > begin) {
    UChar32 c = u.char32At(end - 1);
    if (!u_ispunct(c)) break;
    end -= U16_LENGTH(c);
  }
  return to_utf8(u.tempSubStringBetween(begin, end));
}

std::string token_key(std::string_view token) { return lower(strip_punctuation(nfc(token))); }

std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::vector<std::string> word_set(std::string_view s) {
  std::string norm = nfc(s);
  std::vector<std::string> words;
  for (const TokenSpan& span : whitespace_tokens(norm)) {
    std::string key = lower(strip_punctuation(std::string_view(norm).substr(span.begin, span.end - span.begin)));
    if (!key.empty()) words.push_back(std::move(key));
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const std::size_t uni = a.size() + b.size() - common.size();
  return static_cast<double>(common.size()) / static_cast<double>(uni);
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    lines.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace opreward::text
