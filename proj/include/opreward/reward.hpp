#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "opreward/embedding.hpp"
#include "opreward/format.hpp"
#include "opreward/matching.hpp"
#include "opreward/perspective_set.hpp"

namespace opreward {

enum class LadderMode { kLadder, kLinear };

struct RewardConfig {
  double tau_match = kDefaultMatchThreshold;
  double tau_dup = 0.70;
  LadderMode ladder_mode = LadderMode::kLadder;
  double alpha_cov = 1.5;
  double alpha_uniq = 0.3;
  MaskingConfig masking;
  double dup_jaccard_threshold = kDefaultDupJaccard;

  void validate() const;
};

struct CoverageResult {
  double r_cov = 0.0;
  MatchResult match;
};

struct UniquenessResult {
  double r_uniq = 0.0;
  std::size_t cluster_count = 0;
  std::size_t candidate_count = 0;
  bool degenerate = false;  // no candidates
};

struct LadderTerms {
  double coverage = 0.0;
  double uniqueness = 0.0;
};

struct RewardBreakdown {
  double r_cov = 0.0;
  double r_uniq = 0.0;
  double ladder_cov = 0.0;
  double ladder_uniq = 0.0;
  FormatReward format;
  double final_reward = 0.0;
  std::size_t matched_reference_count = 0;
  std::size_t reference_count = 0;
  std::size_t cluster_count = 0;
  std::size_t candidate_count = 0;
  bool uniqueness_degenerate = false;
  MatchResult match;
};

// Candidate texts used for matching and clustering: the explanation part of
// each template line. Lines that failed to parse are not candidates.
std::vector<std::string> candidate_texts(const ParsedResponse& response);

// Matched-reference fraction under mbgm at cfg.tau_match, masking against
// `prompt`. Zero candidates give r_cov = 0 without calling the provider.
CoverageResult coverage_reward(const ParsedResponse& response, const PerspectiveSet& references,
                               const RewardConfig& cfg, const EmbeddingProvider& provider, std::string_view prompt);
inline CoverageResult coverage_reward(const ParsedResponse& response, const PerspectiveSet& references,
                                      const RewardConfig& cfg, const EmbeddingProvider& provider) {
  return coverage_reward(response, references, cfg, provider, references.prompt);
}

// Connected components of the graph with an edge wherever the (square,
// symmetric) similarity is >= tau_dup.
std::size_t count_clusters(const SimilarityMatrix& pairwise, double tau_dup);

// r_uniq = clusters / candidates; zero candidates give 0 and degenerate=true.
UniquenessResult uniqueness_reward(const ParsedResponse& response, const RewardConfig& cfg,
                                   const EmbeddingProvider& provider, std::string_view prompt = {});

// Stepwise reward tables. Inputs must be in [0, 1].
double ladder_coverage(double r_cov);
double ladder_uniqueness(double r_uniq);
LadderTerms ladder_scale(double r_cov, double r_uniq, const RewardConfig& cfg);

// parse -> coverage -> uniqueness -> format -> ladder; final is the sum of the
// two scaled terms and the format total.
RewardBreakdown score_response(std::string_view prompt, const PerspectiveSet& references,
                               std::string_view raw_response, const RewardConfig& cfg,
                               const EmbeddingProvider& provider);

}  // namespace opreward
