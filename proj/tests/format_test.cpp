#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "opreward/error.hpp"
#include "opreward/format.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace opreward;

namespace {

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kExample =
    "<core perspectives>\nIn the perspective of Justice, restitution is owed.\n</core perspectives>\n"
    "<summary>Justice demands restitution.</summary>";

}  // namespace

TEST(ParseResponse, SingleLineExample) {
  ParsedResponse p = parse_response(kExample);
  ASSERT_EQ(p.core_lines.size(), 1u);
  EXPECT_EQ(p.core_lines[0].name, "Justice");
  EXPECT_EQ(p.core_lines[0].explanation, "restitution is owed.");
  EXPECT_EQ(p.core_lines[0].line_index, 0u);
  EXPECT_EQ(p.summary_text, "Justice demands restitution.");
  EXPECT_EQ(p.unparsed_core_line_count(), 0u);
  EXPECT_TRUE(p.tag_diagnostics.ordered);
}

TEST(ParseResponse, EmptyInput) {
  ParsedResponse p = parse_response("");
  EXPECT_TRUE(p.core_lines.empty());
  EXPECT_EQ(p.summary_text, "");
  EXPECT_EQ(p.tag_diagnostics, TagDiagnostics{});
}

TEST(ParseResponse, NonTemplateLine) {
  ParsedResponse p = parse_response("<core perspectives>\nJustice matters.\n</core perspectives>");
  EXPECT_TRUE(p.core_lines.empty());
  EXPECT_EQ(p.unparsed_core_line_count(), 1u);
  EXPECT_EQ(p.summary_text, "");
}

TEST(ParseResponse, NameStopsAtFirstComma) {
  PerspectiveLine line;
  ASSERT_TRUE(parse_perspective_line("In the perspective of Law, order, and peace, rules bind.", line));
  EXPECT_EQ(line.name, "Law");
  EXPECT_EQ(line.explanation, "order, and peace, rules bind.");
}

TEST(ParseResponse, RejectsMalformedTemplates) {
  PerspectiveLine line;
  EXPECT_FALSE(parse_perspective_line("In the perspective of , nothing.", line));
  EXPECT_FALSE(parse_perspective_line("In the perspective of Justice,", line));
  EXPECT_FALSE(parse_perspective_line("In the perspective of Justice restitution", line));
  EXPECT_FALSE(parse_perspective_line("in the perspective of Justice, lower case prefix.", line));
  EXPECT_FALSE(parse_perspective_line("From the perspective of Justice, wrong phrase.", line));
}

TEST(ParseResponse, CountsEveryTag) {
  ParsedResponse p = parse_response(
      "<core perspectives>\nIn the perspective of A, x.\n</core perspectives>"
      "<core perspectives>\nIn the perspective of B, y.\n</core perspectives><summary>A</summary>");
  EXPECT_EQ(p.tag_diagnostics.core_open_count, 2u);
  EXPECT_EQ(p.tag_diagnostics.core_close_count, 2u);
  ASSERT_EQ(p.core_lines.size(), 1u);
  EXPECT_EQ(p.core_lines[0].name, "A");
}

TEST(ParseResponse, LineIndexCountsUnparsedLines) {
  ParsedResponse p = parse_response(
      "<core perspectives>\nnot a template\n\nIn the perspective of A, x.\n</core perspectives>");
  ASSERT_EQ(p.core_lines.size(), 1u);
  EXPECT_EQ(p.core_lines[0].line_index, 1u);
}

TEST(ParseResponse, SummaryEmptyIffNoWellFormedBlock) {
  EXPECT_EQ(parse_response("<summary>   </summary>").summary_text, "");
  EXPECT_FALSE(parse_response("<summary>   </summary>").summary_block_found);
  EXPECT_EQ(parse_response("<summary>open only").summary_text, "");
  EXPECT_EQ(parse_response("</summary>x<summary>").summary_text, "");
  EXPECT_EQ(parse_response("<summary> ok </summary>").summary_text, "ok");
}

TEST(ParseResponse, ReconstructionReproducesNormalizedLine) {
  ParsedResponse p = parse_response(
      "<core perspectives>\n  In the   perspective of  Care,  people   first.\n</core perspectives>");
  ASSERT_EQ(p.core_lines.size(), 1u);
  EXPECT_EQ(p.core_lines[0].render(), "In the perspective of Care, people first.");
}

TEST(ParseResponse, IdempotentOnReconstruction) {
  oracle::Gen gen(7);
  const std::vector<std::string> names = {"Justice", "Care", "Liberty", "Équité", "Order", "Faith"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PerspectiveLine> lines;
    const std::size_t n = gen.index(1, 6);
    for (std::size_t i = 0; i < n; ++i) {
      lines.push_back({names[gen.index(0, names.size() - 1)], "reason number " + std::to_string(gen.index(0, 999)) + ".",
                       i});
    }
    ParsedResponse first = parse_response(render_response(lines, "summary text"));
    ParsedResponse second = parse_response(render_response(first.core_lines, first.summary_text));
    EXPECT_EQ(first.core_lines, second.core_lines);
    EXPECT_EQ(first.core_lines, lines);
  }
}

TEST(ParseResponse, NeverThrowsOnGarbage) {
  oracle::Gen gen(11);
  const std::vector<std::string> atoms = {"<core perspectives>", "</core perspectives>", "<summary>", "</summary>",
                                          "\n", "In the perspective of ", "X", ", ", "\xff\xfe", "é", " "};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string raw;
    const std::size_t n = gen.index(0, 20);
    for (std::size_t i = 0; i < n; ++i) raw += atoms[gen.index(0, atoms.size() - 1)];
    EXPECT_NO_THROW({
      ParsedResponse p = parse_response(raw);
      FormatReward r = format_reward(p);
      (void)r;
    });
  }
}

TEST(FormatReward, PerfectFiveLines) {
  const std::string raw = testing_support::perspective_response(
      {{"Justice", "restitution is owed."},
       {"Autonomy", "people choose for themselves."},
       {"Care", "relationships come first."},
       {"Tradition", "practice carries wisdom."},
       {"Utility", "outcomes for the many decide."}},
      "Justice, autonomy, care, tradition and utility each matter.");
  FormatReward r = format_reward(parse_response(raw));
  EXPECT_EQ(r.phi_tag, 0.1);
  EXPECT_EQ(r.phi_line, 0.05);
  EXPECT_EQ(r.phi_name, 0.05);
  EXPECT_EQ(r.phi_pen, 0.0);
  EXPECT_EQ(r.total, 0.2);
}

TEST(FormatReward, IdenticalLinesPenalized) {
  const std::string raw = testing_support::perspective_response(
      {{"Justice", "restitution is owed."}, {"Care", "people first."}, {"Justice", "restitution is owed."}},
      "Care matters.");
  FormatReward r = format_reward(parse_response(raw));
  EXPECT_EQ(r.phi_pen, -0.2);
  EXPECT_EQ(r.phi_tag, 0.1);
  EXPECT_EQ(r.phi_line, 0.05);
  EXPECT_EQ(r.phi_name, 0.025);
  EXPECT_EQ(r.total, std::max(0.0, 0.1 + 0.05 + r.phi_name - 0.2));
}

TEST(FormatReward, EmptyParsedResponse) {
  FormatReward r = format_reward(ParsedResponse{});
  EXPECT_EQ(r.phi_tag, 0.0);
  EXPECT_EQ(r.phi_line, 0.0);
  EXPECT_EQ(r.phi_name, 0.0);
  EXPECT_EQ(r.phi_pen, 0.0);
  EXPECT_EQ(r.total, 0.0);
}

TEST(FormatReward, RejectsBadThreshold) {
  ParsedResponse p = parse_response(kExample);
  for (double t : {0.0, -0.1, 1.01, std::nan("")}) {
    try {
      format_reward(p, t);
      FAIL() << t;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
  }
  EXPECT_NO_THROW(format_reward(p, 1.0));
}

TEST(FormatReward, ThresholdControlsJaccardPenalty) {
  ParsedResponse p = parse_response(testing_support::perspective_response(
      {{"Liberty", "speech must stay free of prior restraint."},
       {"Liberty", "speech must stay free of state censorship."}},
      "Liberty."));
  EXPECT_EQ(format_reward(p, 0.9).phi_pen, 0.0);
  EXPECT_EQ(format_reward(p, 0.6).phi_pen, -0.2);
}

TEST(FormatReward, NearDuplicateRules) {
  EXPECT_TRUE(near_duplicate_lines("A  b C", "a b c", 0.9));
  EXPECT_FALSE(near_duplicate_lines("one two three", "four five six", 0.9));
  EXPECT_FALSE(near_duplicate_lines("...", "!!!", 0.9));
}

TEST(FormatReward, BoundsAndClampHoldUnderFuzzing) {
  oracle::Gen gen(3);
  const std::vector<std::string> names = {"Justice", "Care", "Liberty", "Order"};
  for (int trial = 0; trial < 3000; ++trial) {
    std::string raw;
    if (gen.coin(0.8)) raw += "<core perspectives>\n";
    const std::size_t n = gen.index(0, 6);
    for (std::size_t i = 0; i < n; ++i) {
      if (gen.coin(0.7)) {
        raw += "In the perspective of " + names[gen.index(0, 3)] + ", reason " + std::to_string(gen.index(0, 4)) + ".\n";
      } else {
        raw += "loose line " + std::to_string(gen.index(0, 3)) + "\n";
      }
    }
    if (gen.coin(0.8)) raw += "</core perspectives>\n";
    if (gen.coin(0.7)) raw += "<summary>" + names[gen.index(0, 3)] + " and " + names[gen.index(0, 3)] + "</summary>";
    if (gen.coin(0.1)) raw = "<summary>x</summary>" + raw;
    FormatReward r = format_reward(parse_response(raw));
    EXPECT_GE(r.total, 0.0);
    EXPECT_LE(r.total, 0.2);
    EXPECT_NEAR(r.total, std::max(0.0, r.phi_tag + r.phi_line + r.phi_name + r.phi_pen), 1e-15);
    EXPECT_TRUE(r.phi_tag == 0.0 || r.phi_tag == 0.05 || r.phi_tag == 0.1);
    EXPECT_TRUE(r.phi_pen == 0.0 || r.phi_pen == -0.2);
    EXPECT_GE(r.phi_line, 0.0);
    EXPECT_LE(r.phi_line, 0.05);
    EXPECT_GE(r.phi_name, 0.0);
    EXPECT_LE(r.phi_name, 0.05);
  }
}

TEST(FormatReward, LineAndNameCreditMonotone) {
  // Fixed denominators: 4 core lines, 4 distinct names.
  const std::vector<std::string> names = {"Alpha", "Beta", "Gamma", "Delta"};
  double last_line = -1.0;
  for (std::size_t conforming = 0; conforming <= 4; ++conforming) {
    std::string raw = "<core perspectives>\n";
    for (std::size_t i = 0; i < 4; ++i) {
      raw += i < conforming ? "In the perspective of " + names[i] + ", reason " + std::to_string(i) + ".\n"
                            : "loose line number " + std::to_string(i) + "\n";
    }
    raw += "</core perspectives>\n<summary>none</summary>";
    const double line = format_reward(parse_response(raw)).phi_line;
    EXPECT_GE(line, last_line);
    last_line = line;
  }
  double last_name = -1.0;
  std::string summary;
  for (std::size_t reused = 0; reused <= 4; ++reused) {
    if (reused > 0) summary += names[reused - 1] + " ";
    std::vector<std::pair<std::string, std::string>> lines;
    for (std::size_t i = 0; i < 4; ++i) lines.push_back({names[i], "reason " + std::to_string(i) + "."});
    const double name =
        format_reward(parse_response(testing_support::perspective_response(lines, summary + "end"))).phi_name;
    EXPECT_GE(name, last_name);
    last_name = name;
  }
  EXPECT_EQ(last_line, 0.05);
  EXPECT_EQ(last_name, 0.05);
}

class GoldenFormat : public ::testing::TestWithParam<std::string> {};

TEST_P(GoldenFormat, MatchesHandDerivedValues) {
  const std::filesystem::path dir = std::filesystem::path(OPREWARD_TEST_DATA_DIR) / "golden" / "format";
  const nlohmann::json expected = nlohmann::json::parse(read_all(dir / "expected.json"));
  const std::string name = GetParam();
  ASSERT_TRUE(expected.contains(name));
  const nlohmann::json& e = expected[name];
  FormatReward r = format_reward(parse_response(read_all(dir / (name + ".txt"))));
  EXPECT_EQ(r.phi_tag, e["phi_tag"].get<double>());
  EXPECT_EQ(r.phi_line, e["phi_line"].get<double>());
  EXPECT_EQ(r.phi_name, e["phi_name"].get<double>());
  EXPECT_EQ(r.phi_pen, e["phi_pen"].get<double>());
  EXPECT_EQ(r.total, e["total"].get<double>());
}

INSTANTIATE_TEST_SUITE_P(
    Files, GoldenFormat,
    ::testing::Values("01_well_formed", "02_empty", "03_missing_summary", "04_summary_only", "05_reordered_blocks",
                      "06_identical_lines", "07_case_whitespace_duplicate", "08_jaccard_duplicate",
                      "09_similar_not_duplicate", "10_half_template", "11_three_of_four", "12_half_names",
                      "13_names_case_insensitive", "14_two_core_blocks", "15_unclosed_core", "16_blank_summary",
                      "17_no_template_lines", "18_unicode_normalization", "19_duplicate_without_summary",
                      "20_blank_lines_and_spacing"));
