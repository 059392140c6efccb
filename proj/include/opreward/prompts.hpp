#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "opreward/perspective_set.hpp"

// Prompt templates for the LLM-backed stages. The text lives in
// assets/prompts/*.txt and is compiled in.
namespace opreward::prompts {

std::string_view judge_pair_template();
std::string_view augmentation_template();
std::string_view match_perspectives_template();
std::string_view quality_assessment_template();

struct NamedTemplate {
  std::string_view name;
  std::string_view text;
};
std::vector<NamedTemplate> all_templates();

// Single left-to-right pass replacing "{key}"; substituted text is not rescanned.
std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars);

std::string render_judge_prompt(std::string_view sentence_a, std::string_view sentence_b);
std::string render_augmentation_prompt(const PerspectiveSet& set, std::size_t missing_count);
std::string render_match_prompt(std::string_view question, const std::vector<std::string>& references,
                                std::string_view candidate);
std::string render_quality_prompt(std::string_view situation, std::string_view response);

}  // namespace opreward::prompts
