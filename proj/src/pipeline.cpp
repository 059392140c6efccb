#include "opreward/pipeline.hpp"

#include <algorithm>
#include <istream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <set>

#include "opreward/error.hpp"
#include "opreward/format.hpp"
#include "opreward/log.hpp"
#include "opreward/parallel.hpp"
#include "opreward/prompts.hpp"
#include "opreward/text.hpp"

namespace opreward {

using nlohmann::json;

namespace {

std::vector<EmbeddingVector> embed_explanations(const std::vector<std::string>& explanations,
                                                const EmbeddingProvider& provider) {
  return embed(explanations, provider);
}

void check_threshold(double threshold) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "similarity threshold must be in [-1, 1]");
  }
}

std::string vote_reply(const JudgeQuery& query, const LLMClient& judge, int max_attempts) {
  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, max_attempts); ++attempt) {
    try {
      return judge.judge(query);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kProviderUnavailable) throw;
      last_error = e.what();
    }
  }
  fail(ErrorCode::kJudgeFailure, "judge failed on pair (\"" + query.sentence_a + "\", \"" + query.sentence_b +
                                     "\") vote " + std::to_string(query.attempt) + ": " + last_error);
}

bool majority(const std::array<bool, 3>& votes) {
  return std::count(votes.begin(), votes.end(), true) >= 2;
}

}  // namespace

std::vector<CandidatePair> stage1_candidate_pairs(const PerspectiveSet& set, const EmbeddingProvider& provider,
                                                  double threshold) {
  check_threshold(threshold);
  if (set.size() < 2) return {};
  const std::vector<EmbeddingVector> vecs = embed_explanations(set.explanations(), provider);
  std::vector<CandidatePair> out;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      const double s = cosine(vecs[i], vecs[j]);
      if (s >= threshold) out.push_back({i, j, s});
    }
  }
  return out;
}

std::array<bool, 3> judge_votes(const std::string& sentence_a, const std::string& sentence_b, const LLMClient& judge,
                                const JudgeOptions& options) {
  std::array<bool, 3> votes{};
  JudgeQuery query{sentence_a, sentence_b, 0, prompts::render_judge_prompt(sentence_a, sentence_b)};
  for (int attempt = 0; attempt < 3; ++attempt) {
    query.attempt = attempt;
    const std::string reply = vote_reply(query, judge, options.max_attempts);
    switch (classify_judge_reply(reply)) {
      case JudgeReply::kYes:
        votes[attempt] = true;
        break;
      case JudgeReply::kNo:
        break;
      case JudgeReply::kUnrecognized:
        log_warning("unrecognized judge reply counted as No: \"" + reply + "\"");
        break;
    }
  }
  return votes;
}

std::vector<JudgeVerdict> stage2_judge_pairs(const PerspectiveSet& set, const std::vector<CandidatePair>& pairs,
                                             const LLMClient& judge, const JudgeOptions& options) {
  const std::vector<std::string> explanations = set.explanations();
  for (const CandidatePair& p : pairs) {
    if (p.first >= p.second || p.second >= explanations.size()) {
      fail(ErrorCode::kInvalidArgument, "candidate pair (" + std::to_string(p.first) + ", " +
                                            std::to_string(p.second) + ") is out of range for row " + set.row_id);
    }
  }
  std::vector<JudgeVerdict> verdicts(pairs.size());
  parallel_for(pairs.size(), options.parallelism, [&](std::size_t k) {
    const CandidatePair& p = pairs[k];
    JudgeVerdict& v = verdicts[k];
    v.first = p.first;
    v.second = p.second;
    v.sentence_a = explanations[p.first];
    v.sentence_b = explanations[p.second];
    v.votes = judge_votes(v.sentence_a, v.sentence_b, judge, options);
    v.is_duplicate = majority(v.votes);
  });
  return verdicts;
}

std::vector<std::size_t> dedup_removed_indices(std::size_t n, const std::vector<JudgeVerdict>& verdicts) {
  std::vector<std::pair<std::size_t, std::size_t>> dups;
  for (const JudgeVerdict& v : verdicts) {
    if (!v.is_duplicate) continue;
    const std::size_t lo = std::min(v.first, v.second);
    const std::size_t hi = std::max(v.first, v.second);
    if (hi >= n || lo == hi) fail(ErrorCode::kInvalidArgument, "verdict index out of range");
    dups.emplace_back(lo, hi);
  }
  std::sort(dups.begin(), dups.end());
  std::vector<bool> removed(n, false);
  for (const auto& [lo, hi] : dups) {
    if (removed[lo] || removed[hi]) continue;
    removed[hi] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) out.push_back(i);
  }
  return out;
}

PerspectiveSet apply_dedup(const PerspectiveSet& set, const std::vector<JudgeVerdict>& verdicts) {
  const std::vector<std::size_t> removed = dedup_removed_indices(set.size(), verdicts);
  PerspectiveSet out{set.row_id, set.prompt, {}};
  std::size_t r = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (r < removed.size() && removed[r] == i) {
      ++r;
      continue;
    }
    out.perspectives.push_back(set.perspectives[i]);
  }
  return out;
}

AugmentationPlan stage3_plan_augmentation(const PerspectiveSet& set) {
  AugmentationPlan plan;
  const std::size_t n = set.size();
  if (n <= 2) {
    plan.action = AugmentAction::kDrop;
  } else if (n < kMinPerspectives) {
    plan.action = AugmentAction::kAugment;
    plan.missing_count = kMinPerspectives - n;
    plan.prompt = prompts::render_augmentation_prompt(set, plan.missing_count);
  } else {
    plan.action = AugmentAction::kKeep;
  }
  return plan;
}

IngestResult ingest_augmentation(const PerspectiveSet& set, std::string_view reply, std::size_t missing_count) {
  IngestResult result{set, 0, {}};
  std::set<std::string> seen;
  for (const std::string& e : set.explanations()) seen.insert(text::comparison_key(e));
  for (const std::string& raw : text::split_lines(text::nfc(reply))) {
    const std::string line = text::normalize_line(raw);
    if (line.empty()) continue;
    PerspectiveLine parsed;
    if (result.accepted >= missing_count || !parse_perspective_line(line, parsed) ||
        !seen.insert(text::comparison_key(parsed.explanation)).second) {
      result.rejected_lines.push_back(line);
      continue;
    }
    result.set.perspectives.push_back({parsed.name, parsed.explanation, Provenance::kAugmented});
    ++result.accepted;
  }
  return result;
}

RefineResult refine_dataset(const std::vector<PerspectiveSet>& rows, const EmbeddingProvider& provider,
                            const LLMClient& judge, const RefineOptions& options) {
  RefineResult result;
  result.stats.input_rows = rows.size();
  for (const PerspectiveSet& row : rows) {
    RowReport report;
    report.row_id = row.row_id;
    report.input_count = row.size();

    const std::vector<CandidatePair> pairs = stage1_candidate_pairs(row, provider, options.stage1_threshold);
    report.flagged_pairs = pairs.size();
    const std::vector<JudgeVerdict> verdicts = stage2_judge_pairs(row, pairs, judge, options.judge);
    PerspectiveSet deduped = apply_dedup(row, verdicts);
    report.removed = row.size() - deduped.size();

    const AugmentationPlan plan = stage3_plan_augmentation(deduped);
    switch (plan.action) {
      case AugmentAction::kDrop:
        report.outcome = RowOutcome::kDropped;
        break;
      case AugmentAction::kKeep:
        report.outcome = RowOutcome::kKept;
        result.rows.push_back(std::move(deduped));
        break;
      case AugmentAction::kAugment: {
        IngestResult ingested = ingest_augmentation(deduped, judge.generate(plan.prompt), plan.missing_count);
        for (const std::string& line : ingested.rejected_lines) {
          log_warning("row " + row.row_id + ": rejected augmentation line \"" + line + "\"");
        }
        report.added = ingested.accepted;
        if (ingested.set.size() >= kMinPerspectives) {
          report.outcome = RowOutcome::kAugmented;
          result.rows.push_back(std::move(ingested.set));
        } else {
          report.outcome = RowOutcome::kDropped;
          log_warning("row " + row.row_id + ": augmentation left " + std::to_string(ingested.set.size()) +
                      " perspectives, row dropped");
        }
        break;
      }
    }

    RefineStats& s = result.stats;
    s.flagged_pairs += report.flagged_pairs;
    s.duplicates_removed += report.removed;
    if (report.outcome == RowOutcome::kKept) ++s.kept;
    if (report.outcome == RowOutcome::kAugmented) {
      ++s.augmented;
      s.perspectives_added += report.added;
    }
    if (report.outcome == RowOutcome::kDropped) ++s.dropped;
    result.reports.push_back(std::move(report));
  }
  return result;
}

std::vector<Triplet> build_triplets(const PerspectiveSet& set, const LLMClient& judge,
                                    const EmbeddingProvider& provider, const JudgeOptions& options,
                                    std::vector<TripletTrace>* trace) {
  const std::size_t n = set.size();
  if (trace) trace->clear();
  if (n < 3) return {};
  const std::vector<std::string> explanations = set.explanations();
  const std::vector<EmbeddingVector> vecs = embed_explanations(explanations, provider);

  std::vector<TripletTrace> traces(n);
  std::vector<std::optional<Triplet>> found(n);
  JudgeOptions inner = options;
  inner.parallelism = 1;
  parallel_for(n, options.parallelism, [&](std::size_t a) {
    TripletTrace& t = traces[a];
    t.anchor = a;
    std::vector<std::pair<double, std::size_t>> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != a) others.emplace_back(cosine(vecs[a], vecs[j]), j);
    }
    std::stable_sort(others.begin(), others.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& o : others) t.ranked.push_back(o.second);

    std::optional<std::size_t> positive;
    std::optional<std::size_t> negative;
    const std::string anchor_key = text::comparison_key(explanations[a]);
    for (std::size_t j : t.ranked) {
      if (positive && negative) break;
      if (text::comparison_key(explanations[j]) == anchor_key) continue;
      const bool redundant = majority(judge_votes(explanations[a], explanations[j], judge, inner));
      t.judged.emplace_back(j, redundant);
      if (redundant && !positive) positive = j;
      if (!redundant && !negative) negative = j;
    }
    if (positive && negative &&
        text::comparison_key(explanations[*positive]) != text::comparison_key(explanations[*negative])) {
      found[a] = Triplet{set.row_id, set.prompt, explanations[a], explanations[*positive], explanations[*negative]};
      t.emitted = true;
    }
  });

  std::vector<Triplet> out;
  for (auto& f : found) {
    if (f) out.push_back(std::move(*f));
  }
  if (trace) *trace = std::move(traces);
  return out;
}

double uniqueness_score(const PerspectiveSet& set, const EmbeddingProvider& provider, const LLMClient& judge,
                        double tau, const JudgeOptions& options) {
  if (set.size() == 0) fail(ErrorCode::kEmptyInput, "uniqueness score of an empty row " + set.row_id);
  const std::vector<CandidatePair> pairs = stage1_candidate_pairs(set, provider, tau);
  const std::vector<JudgeVerdict> verdicts = stage2_judge_pairs(set, pairs, judge, options);
  const std::size_t removed = dedup_removed_indices(set.size(), verdicts).size();
  return static_cast<double>(set.size() - removed) / static_cast<double>(set.size());
}

void write_triplets_jsonl(std::ostream& out, const std::vector<Triplet>& triplets) {
  for (const Triplet& t : triplets) {
    out << json{{"row_id", t.row_id},
                {"prompt", t.prompt},
                {"anchor", t.anchor},
                {"positive", t.positive},
                {"negative", t.negative}}
               .dump()
        << '\n';
  }
}

std::vector<Triplet> read_triplets_jsonl(std::istream& in, const std::string& source_name) {
  std::vector<Triplet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    try {
      const json row = json::parse(line);
      out.push_back({row.at("row_id").get<std::string>(), row.at("prompt").get<std::string>(),
                     row.at("anchor").get<std::string>(), row.at("positive").get<std::string>(),
                     row.at("negative").get<std::string>()});
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
  }
  return out;
}

const char* row_outcome_name(RowOutcome outcome) {
  switch (outcome) {
    case RowOutcome::kKept: return "kept";
    case RowOutcome::kAugmented: return "augmented";
    case RowOutcome::kDropped: return "dropped";
  }
  return "unknown";
}

}  // namespace opreward
