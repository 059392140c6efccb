#include "opreward/prompts.hpp"

#include "opreward/format.hpp"
#include "prompt_assets.hpp"

namespace opreward::prompts {

std::string_view judge_pair_template() { return assets::kJudgePair; }
std::string_view augmentation_template() { return assets::kAugmentPerspectives; }
std::string_view match_perspectives_template() { return assets::kMatchPerspectives; }
std::string_view quality_assessment_template() { return assets::kQualityAssessment; }

std::vector<NamedTemplate> all_templates() {
  return {
      {"judge_pair", judge_pair_template()},
      {"augment_perspectives", augmentation_template()},
      {"match_perspectives", match_perspectives_template()},
      {"quality_assessment", quality_assessment_template()},
  };
}

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string_view key = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [name, value] : vars) {
          if (name == key) {
            out += value;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string render_judge_prompt(std::string_view sentence_a, std::string_view sentence_b) {
  return render(judge_pair_template(), {{"s1", std::string(sentence_a)}, {"s2", std::string(sentence_b)}});
}

std::string render_augmentation_prompt(const PerspectiveSet& set, std::size_t missing_count) {
  std::string listing;
  for (const Perspective& p : set.perspectives) {
    if (!listing.empty()) listing += '\n';
    listing += PerspectiveLine{p.name, strip_perspective_prefix(p.explanation), 0}.render();
  }
  return render(augmentation_template(), {{"topic", set.prompt},
                                          {"existing_count", std::to_string(set.size())},
                                          {"perspectives", listing},
                                          {"missing_count", std::to_string(missing_count)}});
}

std::string render_match_prompt(std::string_view question, const std::vector<std::string>& references,
                                std::string_view candidate) {
  std::string numbered;
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (i > 0) numbered += '\n';
    numbered += std::to_string(i + 1) + ". " + references[i];
  }
  return render(match_perspectives_template(),
                {{"question", std::string(question)}, {"reference", numbered}, {"candidate", std::string(candidate)}});
}

std::string render_quality_prompt(std::string_view situation, std::string_view response) {
  return render(quality_assessment_template(),
                {{"situation", std::string(situation)}, {"response", std::string(response)}});
}

}  // namespace opreward::prompts
