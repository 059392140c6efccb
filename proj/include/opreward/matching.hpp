#pragma once

#include <cstddef>
#include <vector>

#include "opreward/embedding.hpp"

namespace opreward {

struct MatchPair {
  std::size_t candidate = 0;
  std::size_t reference = 0;
  double score = 0.0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

// One-to-one partial matching. `pairs` is in acceptance order; the unmatched
// index lists are ascending.
struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_candidates;
  std::vector<std::size_t> unmatched_references;
  double threshold_used = 0.0;

  std::size_t matched_reference_count() const { return pairs.size(); }

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

inline constexpr double kDefaultMatchThreshold = 0.70;

// Mutual-best greedy matching with threshold. Entries below tau are masked;
// the maximal surviving entry (ties: lowest row, then lowest column) is
// accepted when it is also a maximum (>=) of its surviving row and column,
// which retires its row and column; otherwise only that entry is retired.
// Throws Error(kInvalidArgument) for tau outside [-1, 1] and
// Error(kEmptyInput) for an empty matrix.
MatchResult mbgm(const SimilarityMatrix& scores, double tau = kDefaultMatchThreshold);

// Per-row argmax (ties: lowest column), kept when >= tau. Rows are matched
// independently, so a reference can be claimed more than once.
std::vector<MatchPair> naive_match(const SimilarityMatrix& scores, double tau = kDefaultMatchThreshold);

// Fills unmatched lists for an arbitrary pair list (used for naive results).
MatchResult to_match_result(const SimilarityMatrix& scores, std::vector<MatchPair> pairs, double tau);

}  // namespace opreward
