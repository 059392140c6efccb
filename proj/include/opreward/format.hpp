#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace opreward {

inline constexpr std::string_view kCoreOpenTag = "<core perspectives>";
inline constexpr std::string_view kCoreCloseTag = "</core perspectives>";
inline constexpr std::string_view kSummaryOpenTag = "<summary>";
inline constexpr std::string_view kSummaryCloseTag = "</summary>";
inline constexpr std::string_view kPerspectivePrefix = "In the perspective of ";

// One templated line: "In the perspective of {name}, {explanation}".
struct PerspectiveLine {
  std::string name;
  std::string explanation;
  std::size_t line_index = 0;  // position among the non-empty core lines

  std::string render() const;

  friend bool operator==(const PerspectiveLine&, const PerspectiveLine&) = default;
};

struct TagDiagnostics {
  std::size_t core_open_count = 0;
  std::size_t core_close_count = 0;
  std::size_t summary_open_count = 0;
  std::size_t summary_close_count = 0;
  // Both blocks are well formed and the core block closes before the summary opens.
  bool ordered = false;

  friend bool operator==(const TagDiagnostics&, const TagDiagnostics&) = default;
};

struct ParsedResponse {
  std::string raw_text;
  std::vector<PerspectiveLine> core_lines;
  // Non-empty core-block lines that do not match the template.
  std::vector<std::string> unparsed_lines;
  std::string summary_text;
  TagDiagnostics tag_diagnostics;
  // Set when the first core / summary block pairs and has non-blank content.
  bool core_block_found = false;
  bool summary_block_found = false;

  std::size_t unparsed_core_line_count() const { return unparsed_lines.size(); }
  std::size_t total_core_line_count() const { return core_lines.size() + unparsed_lines.size(); }
};

struct FormatReward {
  double phi_tag = 0.0;   // [0, 0.1]
  double phi_line = 0.0;  // [0, 0.05]
  double phi_name = 0.0;  // [0, 0.05]
  double phi_pen = 0.0;   // 0 or -0.2
  double total = 0.0;     // max(0, sum), in [0, 0.2]
};

inline constexpr double kTagBlockCredit = 0.05;
inline constexpr double kLineCredit = 0.05;
inline constexpr double kNameCredit = 0.05;
inline constexpr double kRepeatPenalty = -0.2;
inline constexpr double kDefaultDupJaccard = 0.9;

// Total function: malformed text yields empty fields and populated diagnostics.
ParsedResponse parse_response(std::string_view raw);

// Matches a single line against the perspective template. `line` is
// normalized (NFC, trimmed, whitespace collapsed) before matching.
bool parse_perspective_line(std::string_view line, PerspectiveLine& out);

// Removes a leading "In the perspective of X, " if present.
std::string strip_perspective_prefix(std::string_view sentence);

// Throws Error(kInvalidArgument) unless dup_jaccard_threshold is in (0, 1].
FormatReward format_reward(const ParsedResponse& response,
                           double dup_jaccard_threshold = kDefaultDupJaccard);

// True when two lines are equal after lowercasing and whitespace collapse,
// or their word sets have Jaccard similarity >= threshold.
bool near_duplicate_lines(std::string_view a, std::string_view b, double dup_jaccard_threshold);

// Serializes the two-block format; parse_response(render_response(...))
// returns the same core lines.
std::string render_response(const std::vector<PerspectiveLine>& lines, std::string_view summary);

}  // namespace opreward
