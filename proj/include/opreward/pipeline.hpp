#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "opreward/embedding.hpp"
#include "opreward/llm_client.hpp"
#include "opreward/perspective_set.hpp"

namespace opreward {

inline constexpr double kStage1Threshold = 0.65;
inline constexpr std::size_t kMinPerspectives = 5;

struct CandidatePair {
  std::size_t first = 0;  // first < second
  std::size_t second = 0;
  double score = 0.0;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

// Explanation pairs (prefix stripped, unmasked) with cosine >= threshold,
// ascending by (first, second). Sets with fewer than two perspectives give [].
std::vector<CandidatePair> stage1_candidate_pairs(const PerspectiveSet& set, const EmbeddingProvider& provider,
                                                  double threshold = kStage1Threshold);

struct JudgeOptions {
  int max_attempts = 3;         // per vote, retried only on kProviderUnavailable
  std::size_t parallelism = 4;  // concurrent pairs
};

struct JudgeVerdict {
  std::size_t first = 0;
  std::size_t second = 0;
  std::string sentence_a;
  std::string sentence_b;
  std::array<bool, 3> votes{};
  bool is_duplicate = false;
};

// Asks the judge three times; an unrecognized reply is a No vote and is
// logged. A vote that still fails after max_attempts throws
// Error(kJudgeFailure) naming the pair.
std::array<bool, 3> judge_votes(const std::string& sentence_a, const std::string& sentence_b, const LLMClient& judge,
                                const JudgeOptions& options = {});

// One verdict per pair, in input order. is_duplicate = at least two Yes votes.
std::vector<JudgeVerdict> stage2_judge_pairs(const PerspectiveSet& set, const std::vector<CandidatePair>& pairs,
                                             const LLMClient& judge, const JudgeOptions& options = {});

// Indices removed by walking duplicate verdicts in ascending (first, second)
// order: the higher index goes, and pairs touching an already removed index
// are skipped. Result is ascending.
std::vector<std::size_t> dedup_removed_indices(std::size_t n, const std::vector<JudgeVerdict>& verdicts);

PerspectiveSet apply_dedup(const PerspectiveSet& set, const std::vector<JudgeVerdict>& verdicts);

enum class AugmentAction { kDrop, kAugment, kKeep };

struct AugmentationPlan {
  AugmentAction action = AugmentAction::kKeep;
  std::size_t missing_count = 0;
  std::string prompt;  // rendered only for kAugment
};

// <= 2 perspectives: drop; 3 or 4: augment up to five; otherwise keep.
AugmentationPlan stage3_plan_augmentation(const PerspectiveSet& set);

struct IngestResult {
  PerspectiveSet set;
  std::size_t accepted = 0;
  std::vector<std::string> rejected_lines;
};

// Adds up to `missing_count` template lines from an LLM reply as augmented
// perspectives. Non-template lines and explanations already present are
// rejected.
IngestResult ingest_augmentation(const PerspectiveSet& set, std::string_view reply, std::size_t missing_count);

enum class RowOutcome { kKept, kAugmented, kDropped };

struct RowReport {
  std::string row_id;
  std::size_t input_count = 0;
  std::size_t flagged_pairs = 0;
  std::size_t removed = 0;
  std::size_t added = 0;
  RowOutcome outcome = RowOutcome::kKept;
};

struct RefineStats {
  std::size_t input_rows = 0;
  std::size_t kept = 0;
  std::size_t augmented = 0;
  std::size_t dropped = 0;
  std::size_t flagged_pairs = 0;
  std::size_t duplicates_removed = 0;
  std::size_t perspectives_added = 0;
};

struct RefineOptions {
  double stage1_threshold = kStage1Threshold;
  JudgeOptions judge;
};

struct RefineResult {
  std::vector<PerspectiveSet> rows;  // kept and augmented rows, input order
  std::vector<RowReport> reports;    // one per input row
  RefineStats stats;
};

// Stage 1 -> 2 -> dedup -> 3 for every row. Augmented rows that still have
// fewer than five perspectives after ingestion are dropped.
RefineResult refine_dataset(const std::vector<PerspectiveSet>& rows, const EmbeddingProvider& provider,
                            const LLMClient& judge, const RefineOptions& options = {});

struct Triplet {
  std::string row_id;
  std::string prompt;
  std::string anchor;
  std::string positive;
  std::string negative;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletTrace {
  std::size_t anchor = 0;
  std::vector<std::size_t> ranked;                   // others by descending similarity
  std::vector<std::pair<std::size_t, bool>> judged;  // (index, redundant) in order asked
  bool emitted = false;
};

// For each anchor, walks the other explanations by descending similarity
// asking the judge; the first redundant one is the positive, the first
// distinct one the negative. Anchors lacking either are skipped. Sets with
// fewer than three perspectives give [].
std::vector<Triplet> build_triplets(const PerspectiveSet& set, const LLMClient& judge,
                                    const EmbeddingProvider& provider, const JudgeOptions& options = {},
                                    std::vector<TripletTrace>* trace = nullptr);

// (n - removed) / n after stage 1 and 2. Throws Error(kEmptyInput) for an
// empty set.
double uniqueness_score(const PerspectiveSet& set, const EmbeddingProvider& provider, const LLMClient& judge,
                        double tau = kStage1Threshold, const JudgeOptions& options = {});

void write_triplets_jsonl(std::ostream& out, const std::vector<Triplet>& triplets);
std::vector<Triplet> read_triplets_jsonl(std::istream& in, const std::string& source_name = "<stream>");

const char* row_outcome_name(RowOutcome outcome);

}  // namespace opreward
