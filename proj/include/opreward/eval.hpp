#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opreward/embedding.hpp"
#include "opreward/matching.hpp"

namespace opreward {

// cp_k: k candidates, each a paraphrase of a distinct reference.
// rp_j: three references, j candidates of which exactly three map to them.
enum class Subtask { kCp1, kCp2, kCp3, kCp4, kCp5, kRp3, kRp4, kRp5 };

inline constexpr Subtask kAllSubtasks[] = {Subtask::kCp1, Subtask::kCp2, Subtask::kCp3, Subtask::kCp4,
                                           Subtask::kCp5, Subtask::kRp3, Subtask::kRp4, Subtask::kRp5};

std::string_view subtask_name(Subtask s);
std::optional<Subtask> parse_subtask(std::string_view name);
bool is_candidate_subtask(Subtask s);  // cp*
std::size_t subtask_size(Subtask s);   // k or j

struct ProtocolCase {
  std::string id;  // optional in files
  std::string question;
  std::vector<std::string> references;
  std::vector<std::string> candidates;
  std::map<std::size_t, std::size_t> ground_truth;  // candidate -> reference
  Subtask subtask = Subtask::kCp1;

  // Throws Error(kInvalidArgument) when the shape contradicts the subtask.
  void validate() const;
};

enum class Matcher { kMbgm, kNaive };
std::string_view matcher_name(Matcher m);
std::optional<Matcher> parse_matcher(std::string_view name);

struct EvalOptions {
  MaskingConfig masking;
  std::size_t parallelism = 1;
};

// Exact-mapping rule: every ground-truth candidate is matched to its reference
// and no other candidate is matched at all.
bool mapping_is_exact(const ProtocolCase& c, const std::vector<MatchPair>& pairs);

bool evaluate_matrix(const ProtocolCase& c, const SimilarityMatrix& scores, Matcher matcher, double tau);
bool evaluate_case(const ProtocolCase& c, Matcher matcher, double tau, const EmbeddingProvider& provider,
                   const EvalOptions& options = {});

// Candidate x reference matrix with the question used for masking.
SimilarityMatrix case_matrix(const ProtocolCase& c, const EmbeddingProvider& provider, const MaskingConfig& masking);

struct SubtaskResult {
  double accuracy = 0.0;
  std::size_t n_cases = 0;
  std::size_t n_correct = 0;
  double mean_latency_s = 0.0;
};

struct ProtocolReport {
  std::map<Subtask, SubtaskResult> per_subtask;  // only subtasks with cases
  std::optional<double> avg1;                    // mean over cp subtasks present
  std::optional<double> avg2;                    // mean over rp subtasks present
  std::optional<double> total_avg;               // mean over all subtasks present
  std::vector<double> per_case_latency_s;        // input order
  std::vector<bool> verdicts;                    // input order
};

ProtocolReport run_protocol(const std::vector<ProtocolCase>& cases, Matcher matcher, double tau,
                            const EmbeddingProvider& provider, const EvalOptions& options = {});

// 0.65, 0.66, ..., 0.80.
std::vector<double> default_tau_grid();

// Matrices are computed once per case and reused for every tau.
std::map<double, ProtocolReport> threshold_sweep(const std::vector<ProtocolCase>& cases, Matcher matcher,
                                                 const std::vector<double>& tau_grid,
                                                 const EmbeddingProvider& provider, const EvalOptions& options = {});

// subtask,accuracy,n_cases,mean_latency_s then avg1/avg2/total rows.
void write_report_csv(std::ostream& out, const ProtocolReport& report);
// Same columns with a leading tau column.
void write_sweep_csv(std::ostream& out, const std::map<double, ProtocolReport>& sweep);

// {"question", "references", "candidates", "ground_truth": {"0": 2}, "subtask": "cp3"}
std::vector<ProtocolCase> read_cases_jsonl(std::istream& in, const std::string& source_name = "<stream>");
std::vector<ProtocolCase> read_cases_jsonl(const std::string& path);
void write_cases_jsonl(std::ostream& out, const std::vector<ProtocolCase>& cases);

// Vector-space test suite. References are orthonormal axes; a paraphrase of
// reference r is cos(s) towards r plus a private noise axis, so every
// similarity is known exactly. rp distractors lean towards one reference at
// distractor_sim. An unsolvable case lets a distractor dominate its reference
// when there is one (rp4, rp5) and otherwise pushes one paraphrase below any
// sensible threshold.
struct SyntheticSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t cases_per_subtask = 10;
  double correct_sim = 0.725;
  double distractor_sim = 0.685;
  double unsolvable_fraction = 0.0;
  double weak_paraphrase_sim = 0.5;  // cp unsolvable cases
  double dominant_distractor_sim = 0.9;
  double dominated_correct_sim = 0.8;
};

struct SyntheticSuite {
  std::vector<ProtocolCase> cases;
  std::vector<bool> solvable;  // by construction, for thresholds in (distractor_sim, correct_sim]
  LocalVectorStore store;
};

SyntheticSuite make_synthetic_suite(const SyntheticSuiteOptions& options);

}  // namespace opreward
