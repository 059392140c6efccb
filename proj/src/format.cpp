#include "opreward/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "opreward/error.hpp"
#include "opreward/text.hpp"

namespace opreward {
namespace {

constexpr std::int64_t kUnitsPerOne = 100;
constexpr std::int64_t kTagUnits = 5;
constexpr std::int64_t kLineUnits = 5;
constexpr std::int64_t kNameUnits = 5;
constexpr std::int64_t kPenaltyUnits = -20;

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

struct Block {
  bool found = false;
  std::size_t open = std::string_view::npos;
  std::size_t close_end = std::string_view::npos;
  std::string_view content;
};

// First open tag, then the first close tag after it. Blank content does not count.
Block find_block(std::string_view text, std::string_view open_tag, std::string_view close_tag) {
  Block b;
  std::size_t open = text.find(open_tag);
  if (open == std::string_view::npos) return b;
  std::size_t body = open + open_tag.size();
  std::size_t close = text.find(close_tag, body);
  if (close == std::string_view::npos) return b;
  b.open = open;
  b.close_end = close + close_tag.size();
  b.content = text.substr(body, close - body);
  b.found = !text::trim(b.content).empty();
  return b;
}

// `line` must already be NFC with whitespace collapsed.
bool match_template(std::string_view line, PerspectiveLine& out) {
  if (line.substr(0, kPerspectivePrefix.size()) != kPerspectivePrefix) return false;
  std::string_view rest = line.substr(kPerspectivePrefix.size());
  std::size_t comma = rest.find(',');
  if (comma == std::string_view::npos || comma == 0) return false;
  std::string_view name = rest.substr(0, comma);
  if (name.front() == ' ' || name.back() == ' ') return false;
  if (comma + 1 >= rest.size() || rest[comma + 1] != ' ') return false;
  std::string_view explanation = rest.substr(comma + 2);
  if (explanation.empty()) return false;
  out.name = std::string(name);
  out.explanation = std::string(explanation);
  return true;
}

}  // namespace

std::string PerspectiveLine::render() const {
  std::string s(kPerspectivePrefix);
  s += name;
  s += ", ";
  s += explanation;
  return s;
}

bool parse_perspective_line(std::string_view line, PerspectiveLine& out) {
  return match_template(text::normalize_line(line), out);
}

std::string strip_perspective_prefix(std::string_view sentence) {
  std::string norm = text::normalize_line(sentence);
  PerspectiveLine parsed;
  if (match_template(norm, parsed)) return parsed.explanation;
  return norm;
}

ParsedResponse parse_response(std::string_view raw) {
  ParsedResponse p;
  p.raw_text = std::string(raw);
  const std::string text = text::nfc(raw);

  TagDiagnostics& diag = p.tag_diagnostics;
  diag.core_open_count = count_occurrences(text, kCoreOpenTag);
  diag.core_close_count = count_occurrences(text, kCoreCloseTag);
  diag.summary_open_count = count_occurrences(text, kSummaryOpenTag);
  diag.summary_close_count = count_occurrences(text, kSummaryCloseTag);

  const Block core = find_block(text, kCoreOpenTag, kCoreCloseTag);
  if (core.found) {
    p.core_block_found = true;
    std::size_t index = 0;
    for (const std::string& raw_line : text::split_lines(core.content)) {
      std::string line = text::collapse_whitespace(raw_line);
      if (line.empty()) continue;
      PerspectiveLine parsed;
      if (match_template(line, parsed)) {
        parsed.line_index = index;
        p.core_lines.push_back(std::move(parsed));
      } else {
        p.unparsed_lines.push_back(std::move(line));
      }
      ++index;
    }
  }

  const Block summary = find_block(text, kSummaryOpenTag, kSummaryCloseTag);
  if (summary.found) {
    p.summary_block_found = true;
    p.summary_text = text::trim(summary.content);
  }

  diag.ordered = core.found && summary.found && core.close_end <= summary.open;
  return p;
}

bool near_duplicate_lines(std::string_view a, std::string_view b, double dup_jaccard_threshold) {
  if (text::comparison_key(a) == text::comparison_key(b)) return true;
  return text::jaccard(text::word_set(a), text::word_set(b)) >= dup_jaccard_threshold;
}

FormatReward format_reward(const ParsedResponse& p, double dup_jaccard_threshold) {
  if (!(dup_jaccard_threshold > 0.0 && dup_jaccard_threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "dup_jaccard_threshold must be in (0, 1]");
  }
  const TagDiagnostics& diag = p.tag_diagnostics;
  FormatReward r;

  const bool core_ok = p.core_block_found && diag.core_open_count == 1 && diag.core_close_count == 1;
  const bool summary_ok = p.summary_block_found && diag.summary_open_count == 1 &&
                          diag.summary_close_count == 1 && diag.ordered;

  // Components are rationals in hundredths; each is rounded to double once so
  // decimal values like 0.175 come out as the nearest double.
  const auto total_lines = static_cast<std::int64_t>(p.total_core_line_count());
  const auto matched_lines = static_cast<std::int64_t>(p.core_lines.size());

  std::set<std::string> names;
  for (const PerspectiveLine& line : p.core_lines) names.insert(text::comparison_key(line.name));
  std::int64_t reused = 0;
  if (!names.empty() && !p.summary_text.empty()) {
    const std::string summary = text::comparison_key(p.summary_text);
    for (const std::string& name : names) {
      if (summary.find(name) != std::string::npos) ++reused;
    }
  }
  const auto name_count = static_cast<std::int64_t>(names.size());

  std::vector<std::string> lines;
  lines.reserve(static_cast<std::size_t>(total_lines));
  for (const PerspectiveLine& line : p.core_lines) lines.push_back(line.render());
  for (const std::string& line : p.unparsed_lines) lines.push_back(line);
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> words;
  for (const std::string& line : lines) {
    keys.push_back(text::comparison_key(line));
    words.push_back(text::word_set(line));
  }
  bool duplicate = false;
  for (std::size_t i = 0; i < lines.size() && !duplicate; ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (keys[i] == keys[j] || text::jaccard(words[i], words[j]) >= dup_jaccard_threshold) {
        duplicate = true;
        break;
      }
    }
  }

  const std::int64_t tag_units = (core_ok ? kTagUnits : 0) + (summary_ok ? kTagUnits : 0);
  const std::int64_t pen_units = duplicate ? kPenaltyUnits : 0;
  const std::int64_t line_den = total_lines > 0 ? total_lines : 1;
  const std::int64_t name_den = name_count > 0 ? name_count : 1;
  const std::int64_t line_num = kLineUnits * matched_lines;
  const std::int64_t name_num = kNameUnits * reused;

  r.phi_tag = static_cast<double>(tag_units) / kUnitsPerOne;
  r.phi_line = static_cast<double>(line_num) / static_cast<double>(kUnitsPerOne * line_den);
  r.phi_name = static_cast<double>(name_num) / static_cast<double>(kUnitsPerOne * name_den);
  r.phi_pen = static_cast<double>(pen_units) / kUnitsPerOne;
  const std::int64_t sum = (tag_units + pen_units) * line_den * name_den + line_num * name_den + name_num * line_den;
  r.total = static_cast<double>(std::max<std::int64_t>(0, sum)) /
            static_cast<double>(kUnitsPerOne * line_den * name_den);
  return r;
}

std::string render_response(const std::vector<PerspectiveLine>& lines, std::string_view summary) {
  std::string out(kCoreOpenTag);
  out += '\n';
  for (const PerspectiveLine& line : lines) {
    out += line.render();
    out += '\n';
  }
  out += kCoreCloseTag;
  out += '\n';
  out += kSummaryOpenTag;
  out += '\n';
  out += summary;
  out += '\n';
  out += kSummaryCloseTag;
  out += '\n';
  return out;
}

}  // namespace opreward
