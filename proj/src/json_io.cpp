#include "opreward/json_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "opreward/error.hpp"

namespace opreward {

using nlohmann::json;

std::string format_number(double value) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) fail(ErrorCode::kInvalidArgument, "cannot format number");
  return std::string(buf, end);
}

json to_json(const MatchPair& pair) {
  return {{"candidate", pair.candidate}, {"reference", pair.reference}, {"score", pair.score}};
}

json to_json(const MatchResult& result) {
  json pairs = json::array();
  for (const MatchPair& p : result.pairs) pairs.push_back(to_json(p));
  return {{"pairs", pairs},
          {"unmatched_candidates", result.unmatched_candidates},
          {"unmatched_references", result.unmatched_references},
          {"threshold_used", result.threshold_used}};
}

json to_json(const FormatReward& reward) {
  return {{"phi_tag", reward.phi_tag},
          {"phi_line", reward.phi_line},
          {"phi_name", reward.phi_name},
          {"phi_pen", reward.phi_pen},
          {"total", reward.total}};
}

json to_json(const RewardBreakdown& b) {
  return {{"r_cov", b.r_cov},
          {"r_uniq", b.r_uniq},
          {"ladder_cov", b.ladder_cov},
          {"ladder_uniq", b.ladder_uniq},
          {"format", to_json(b.format)},
          {"final", b.final_reward},
          {"matched_reference_count", b.matched_reference_count},
          {"reference_count", b.reference_count},
          {"cluster_count", b.cluster_count},
          {"candidate_count", b.candidate_count},
          {"uniqueness_degenerate", b.uniqueness_degenerate},
          {"match", to_json(b.match)}};
}

json to_json(const AdvantageSet& advantages) {
  return {{"per_response_advantage", advantages.per_response}, {"degenerate", advantages.degenerate}};
}

json to_json(const MaskingConfig& masking) {
  return {{"enabled", masking.enabled},
          {"placeholder", masking.placeholder},
          {"min_token_length", masking.min_token_length},
          {"stopwords", std::vector<std::string>(masking.stopwords.begin(), masking.stopwords.end())}};
}

json to_json(const RewardConfig& config) {
  return {{"tau_match", config.tau_match},
          {"tau_dup", config.tau_dup},
          {"ladder_mode", config.ladder_mode == LadderMode::kLadder ? "ladder" : "linear"},
          {"alpha_cov", config.alpha_cov},
          {"alpha_uniq", config.alpha_uniq},
          {"dup_jaccard_threshold", config.dup_jaccard_threshold},
          {"masking", to_json(config.masking)}};
}

namespace {

void read_number(const json& obj, const char* key, double lo, double hi, bool lo_open, double& out,
                 const std::string& path, std::vector<FieldError>& errors) {
  if (!obj.contains(key)) return;
  const std::string field = path.empty() ? key : path + "." + key;
  const json& v = obj[key];
  if (!v.is_number()) {
    errors.push_back({field, "must be a number"});
    return;
  }
  const double x = v.get<double>();
  const bool ok = std::isfinite(x) && (lo_open ? x > lo : x >= lo) && x <= hi;
  if (!ok) {
    errors.push_back({field, std::string("must be in ") + (lo_open ? "(" : "[") + format_number(lo) + ", " +
                                 format_number(hi) + "]"});
    return;
  }
  out = x;
}

void apply_masking(MaskingConfig& m, const json& obj, const std::string& path, std::vector<FieldError>& errors) {
  if (!obj.is_object()) {
    errors.push_back({path, "must be an object"});
    return;
  }
  for (const auto& [key, value] : obj.items()) {
    const std::string field = path + "." + key;
    if (key == "enabled") {
      if (value.is_boolean()) {
        m.enabled = value.get<bool>();
      } else {
        errors.push_back({field, "must be a boolean"});
      }
    } else if (key == "placeholder") {
      if (value.is_string() && !value.get<std::string>().empty()) {
        m.placeholder = value.get<std::string>();
      } else {
        errors.push_back({field, "must be a non-empty string"});
      }
    } else if (key == "min_token_length") {
      if (value.is_number_unsigned()) {
        m.min_token_length = value.get<std::size_t>();
      } else {
        errors.push_back({field, "must be a non-negative integer"});
      }
    } else if (key == "stopwords") {
      bool ok = value.is_array();
      std::set<std::string> words;
      if (ok) {
        for (const json& w : value) {
          if (!w.is_string()) {
            ok = false;
            break;
          }
          words.insert(w.get<std::string>());
        }
      }
      if (ok) {
        m.stopwords = std::move(words);
      } else {
        errors.push_back({field, "must be an array of strings"});
      }
    } else {
      errors.push_back({field, "unknown field"});
    }
  }
  if (m.stopwords.count(m.placeholder) != 0) errors.push_back({path + ".placeholder", "must not be a stopword"});
}

}  // namespace

void apply_config_overrides(RewardConfig& config, const json& overrides, const std::string& path,
                            std::vector<FieldError>& errors) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) {
    errors.push_back({path, "must be an object"});
    return;
  }
  static const std::set<std::string> kKnown = {"tau_match",  "tau_dup",    "ladder_mode",          "alpha_cov",
                                               "alpha_uniq", "masking",    "dup_jaccard_threshold"};
  for (const auto& [key, value] : overrides.items()) {
    if (kKnown.count(key) == 0) errors.push_back({path.empty() ? key : path + "." + key, "unknown field"});
  }
  const double inf = std::numeric_limits<double>::infinity();
  read_number(overrides, "tau_match", -1.0, 1.0, false, config.tau_match, path, errors);
  read_number(overrides, "tau_dup", -1.0, 1.0, false, config.tau_dup, path, errors);
  read_number(overrides, "alpha_cov", 0.0, inf, false, config.alpha_cov, path, errors);
  read_number(overrides, "alpha_uniq", 0.0, inf, false, config.alpha_uniq, path, errors);
  read_number(overrides, "dup_jaccard_threshold", 0.0, 1.0, true, config.dup_jaccard_threshold, path, errors);
  if (overrides.contains("ladder_mode")) {
    const json& v = overrides["ladder_mode"];
    const std::string field = path.empty() ? "ladder_mode" : path + ".ladder_mode";
    if (v == "ladder") {
      config.ladder_mode = LadderMode::kLadder;
    } else if (v == "linear") {
      config.ladder_mode = LadderMode::kLinear;
    } else {
      errors.push_back({field, "must be \"ladder\" or \"linear\""});
    }
  }
  if (overrides.contains("masking")) {
    apply_masking(config.masking, overrides["masking"], path.empty() ? "masking" : path + ".masking", errors);
  }
}

RewardConfig load_config_file(const std::string& path, const RewardConfig& base) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
  RewardConfig config = base;
  std::vector<FieldError> errors;
  apply_config_overrides(config, doc, "", errors);
  if (!errors.empty()) {
    std::string message = path + ": invalid config";
    for (const FieldError& e : errors) message += "; " + e.field + " " + e.message;
    fail(ErrorCode::kParse, message);
  }
  return config;
}

}  // namespace opreward
