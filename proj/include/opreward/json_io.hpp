#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "opreward/grpo.hpp"
#include "opreward/matching.hpp"
#include "opreward/reward.hpp"

namespace opreward {

// Shortest decimal string that parses back to the same double.
std::string format_number(double value);

nlohmann::json to_json(const MatchPair& pair);
nlohmann::json to_json(const MatchResult& result);
nlohmann::json to_json(const FormatReward& reward);
nlohmann::json to_json(const RewardBreakdown& breakdown);
nlohmann::json to_json(const AdvantageSet& advantages);
nlohmann::json to_json(const MaskingConfig& masking);
nlohmann::json to_json(const RewardConfig& config);

struct FieldError {
  std::string field;  // JSON path, e.g. "config_overrides.tau_match"
  std::string message;

  friend bool operator==(const FieldError&, const FieldError&) = default;
};

// Applies the keys present in `overrides` (a partial RewardConfig object) on
// top of `config`. Problems are appended to `errors` with paths under
// `path`; valid keys are still applied. Unknown keys are errors.
void apply_config_overrides(RewardConfig& config, const nlohmann::json& overrides, const std::string& path,
                            std::vector<FieldError>& errors);

// Reads a config file (a partial RewardConfig object). Throws Error(kParse)
// listing every field problem.
RewardConfig load_config_file(const std::string& path, const RewardConfig& base = {});

}  // namespace opreward
