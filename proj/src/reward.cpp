#include "opreward/reward.hpp"

#include <cmath>

#include "opreward/error.hpp"
#include "opreward/union_find.hpp"

namespace opreward {
namespace {

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0)) fail(ErrorCode::kInvalidArgument, std::string(what) + " must be in [0, 1]");
}

double matched_fraction(const MatchResult& match, std::size_t reference_count) {
  return static_cast<double>(match.matched_reference_count()) / static_cast<double>(reference_count);
}

MatchResult empty_match(std::size_t reference_count, double tau) {
  MatchResult m;
  m.threshold_used = tau;
  for (std::size_t j = 0; j < reference_count; ++j) m.unmatched_references.push_back(j);
  return m;
}

}  // namespace

void RewardConfig::validate() const {
  if (!(tau_match >= -1.0 && tau_match <= 1.0)) fail(ErrorCode::kInvalidArgument, "tau_match must be in [-1, 1]");
  if (!(tau_dup >= -1.0 && tau_dup <= 1.0)) fail(ErrorCode::kInvalidArgument, "tau_dup must be in [-1, 1]");
  if (!(alpha_cov >= 0.0) || !std::isfinite(alpha_cov)) fail(ErrorCode::kInvalidArgument, "alpha_cov must be >= 0");
  if (!(alpha_uniq >= 0.0) || !std::isfinite(alpha_uniq)) {
    fail(ErrorCode::kInvalidArgument, "alpha_uniq must be >= 0");
  }
  if (!(dup_jaccard_threshold > 0.0 && dup_jaccard_threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "dup_jaccard_threshold must be in (0, 1]");
  }
  masking.validate();
}

std::vector<std::string> candidate_texts(const ParsedResponse& response) {
  std::vector<std::string> out;
  out.reserve(response.core_lines.size());
  for (const PerspectiveLine& line : response.core_lines) out.push_back(line.explanation);
  return out;
}

CoverageResult coverage_reward(const ParsedResponse& response, const PerspectiveSet& references,
                               const RewardConfig& cfg, const EmbeddingProvider& provider, std::string_view prompt) {
  cfg.validate();
  if (references.perspectives.empty()) fail(ErrorCode::kEmptyInput, "reference set is empty");
  const std::vector<std::string> candidates = candidate_texts(response);
  CoverageResult out;
  if (candidates.empty()) {
    out.match = empty_match(references.size(), cfg.tau_match);
    return out;
  }
  SimilarityMatrix s = similarity_matrix(candidates, references.explanations(), prompt, cfg.masking, provider);
  out.match = mbgm(s, cfg.tau_match);
  out.r_cov = matched_fraction(out.match, references.size());
  return out;
}

std::size_t count_clusters(const SimilarityMatrix& pairwise, double tau_dup) {
  if (pairwise.rows() != pairwise.cols()) {
    fail(ErrorCode::kDimensionMismatch, "pairwise similarity matrix must be square");
  }
  const std::size_t n = pairwise.rows();
  UnionFind sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pairwise.at(i, j) >= tau_dup) sets.unite(i, j);
    }
  }
  return sets.components();
}

UniquenessResult uniqueness_reward(const ParsedResponse& response, const RewardConfig& cfg,
                                   const EmbeddingProvider& provider, std::string_view prompt) {
  cfg.validate();
  const std::vector<std::string> candidates = candidate_texts(response);
  UniquenessResult out;
  out.candidate_count = candidates.size();
  if (candidates.empty()) {
    out.degenerate = true;
    return out;
  }
  if (candidates.size() == 1) {
    out.cluster_count = 1;
  } else {
    SimilarityMatrix s = similarity_matrix(candidates, candidates, prompt, cfg.masking, provider);
    out.cluster_count = count_clusters(s, cfg.tau_dup);
  }
  out.r_uniq = static_cast<double>(out.cluster_count) / static_cast<double>(out.candidate_count);
  return out;
}

double ladder_coverage(double r) {
  check_rate(r, "r_cov");
  if (r == 0.0) return 0.0;
  if (r < 0.2) return 0.3;
  if (r < 0.4) return 0.6;
  if (r < 0.6) return 0.9;
  if (r < 0.8) return 1.2;
  return 1.5;
}

double ladder_uniqueness(double r) {
  check_rate(r, "r_uniq");
  if (r == 1.0) return 0.3;
  if (r > 0.8) return 0.2;
  if (r > 0.6) return 0.1;
  return 0.0;
}

LadderTerms ladder_scale(double r_cov, double r_uniq, const RewardConfig& cfg) {
  if (cfg.ladder_mode == LadderMode::kLadder) return {ladder_coverage(r_cov), ladder_uniqueness(r_uniq)};
  check_rate(r_cov, "r_cov");
  check_rate(r_uniq, "r_uniq");
  return {cfg.alpha_cov * r_cov, cfg.alpha_uniq * r_uniq};
}

RewardBreakdown score_response(std::string_view prompt, const PerspectiveSet& references,
                               std::string_view raw_response, const RewardConfig& cfg,
                               const EmbeddingProvider& provider) {
  cfg.validate();
  if (references.perspectives.empty()) fail(ErrorCode::kEmptyInput, "reference set is empty");

  const ParsedResponse parsed = parse_response(raw_response);
  const std::vector<std::string> candidates = candidate_texts(parsed);
  const std::vector<std::string> reference_texts = references.explanations();

  RewardBreakdown b;
  b.reference_count = reference_texts.size();
  b.candidate_count = candidates.size();

  if (candidates.empty()) {
    b.match = empty_match(b.reference_count, cfg.tau_match);
    b.uniqueness_degenerate = true;
  } else {
    // One embedding batch serves both the coverage and the uniqueness matrix.
    std::vector<std::string> batch = mask_prompt_keywords(prompt, candidates, cfg.masking);
    const std::vector<std::string> masked_refs = mask_prompt_keywords(prompt, reference_texts, cfg.masking);
    batch.insert(batch.end(), masked_refs.begin(), masked_refs.end());
    const std::vector<EmbeddingVector> vectors = embed(batch, provider);
    const auto split = vectors.begin() + static_cast<std::ptrdiff_t>(candidates.size());
    const std::vector<EmbeddingVector> cand(vectors.begin(), split);
    const std::vector<EmbeddingVector> refs(split, vectors.end());

    b.match = mbgm(similarity_matrix(cand, refs, candidates, reference_texts), cfg.tau_match);
    b.cluster_count = cand.size() == 1 ? 1 : count_clusters(similarity_matrix(cand, cand), cfg.tau_dup);
    b.r_uniq = static_cast<double>(b.cluster_count) / static_cast<double>(b.candidate_count);
  }
  b.matched_reference_count = b.match.matched_reference_count();
  b.r_cov = matched_fraction(b.match, b.reference_count);

  b.format = format_reward(parsed, cfg.dup_jaccard_threshold);
  const LadderTerms terms = ladder_scale(b.r_cov, b.r_uniq, cfg);
  b.ladder_cov = terms.coverage;
  b.ladder_uniq = terms.uniqueness;
  b.final_reward = b.ladder_cov + b.ladder_uniq + b.format.total;
  return b;
}

}  // namespace opreward
