#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "opreward/error.hpp"
#include "opreward/eval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace opreward;
using testing_support::axis;
using testing_support::lean;

namespace {

ProtocolCase rp4_case() {
  ProtocolCase c;
  c.id = "adv";
  c.question = "Q";
  c.subtask = Subtask::kRp4;
  c.references = {"r0", "r1", "r2"};
  c.candidates = {"c0", "c1", "c2", "d"};
  c.ground_truth = {{0, 0}, {1, 1}, {2, 2}};
  return c;
}

// c_i paraphrases r_i at 0.9; the distractor leans towards r0 at 0.8.
SimilarityMatrix rp4_matrix() {
  return SimilarityMatrix::from_rows({{0.9, 0.1, 0.1}, {0.1, 0.9, 0.1}, {0.1, 0.1, 0.9}, {0.8, 0.1, 0.1}});
}

ProtocolCase copy_case(std::size_t k, LocalVectorStore& store, const std::string& tag) {
  ProtocolCase c;
  c.id = tag;
  c.question = "Q";
  c.subtask = static_cast<Subtask>(k - 1);
  for (std::size_t j = 0; j < 5; ++j) {
    c.references.push_back(tag + " ref " + std::to_string(j));
    store.insert(c.references.back(), axis(5, j));
  }
  for (std::size_t i = 0; i < k; ++i) {
    c.candidates.push_back(c.references[4 - i]);
    c.ground_truth[i] = 4 - i;
  }
  return c;
}

ProtocolCase permuted(const ProtocolCase& c, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(c.references.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ProtocolCase out = c;
  for (std::size_t j = 0; j < perm.size(); ++j) out.references[perm[j]] = c.references[j];
  for (auto& [cand, ref] : out.ground_truth) ref = perm[ref];
  return out;
}

}  // namespace

TEST(Subtasks, NamesAndSizes) {
  for (Subtask s : kAllSubtasks) EXPECT_EQ(parse_subtask(subtask_name(s)), s);
  EXPECT_EQ(subtask_name(Subtask::kRp5), "rp5");
  EXPECT_EQ(subtask_size(Subtask::kCp3), 3u);
  EXPECT_EQ(subtask_size(Subtask::kRp4), 4u);
  EXPECT_FALSE(parse_subtask("cp6").has_value());
  EXPECT_EQ(parse_matcher("naive"), Matcher::kNaive);
  EXPECT_FALSE(parse_matcher("hungarian").has_value());
}

TEST(ProtocolCase, ValidationRejectsBadShapes) {
  ProtocolCase c = rp4_case();
  EXPECT_NO_THROW(c.validate());
  ProtocolCase too_many = c;
  too_many.ground_truth[3] = 0;
  EXPECT_THROW(too_many.validate(), Error);
  ProtocolCase wrong_size = c;
  wrong_size.candidates.pop_back();
  EXPECT_THROW(wrong_size.validate(), Error);
  ProtocolCase shared = c;
  shared.ground_truth[1] = 0;
  EXPECT_THROW(shared.validate(), Error);
  ProtocolCase cp = c;
  cp.subtask = Subtask::kCp4;
  EXPECT_THROW(cp.validate(), Error);  // cp4 needs every candidate mapped
  ProtocolCase out_of_range = c;
  out_of_range.ground_truth[2] = 7;
  EXPECT_THROW(out_of_range.validate(), Error);
}

TEST(EvaluateCase, VerbatimCopiesPass) {
  LocalVectorStore store;
  for (std::size_t k = 1; k <= 5; ++k) {
    EXPECT_TRUE(evaluate_case(copy_case(k, store, "t" + std::to_string(k)), Matcher::kMbgm, 0.7, store));
  }
}

TEST(EvaluateCase, MatchedDistractorFails) {
  const ProtocolCase c = rp4_case();
  std::vector<MatchPair> exact = {{0, 0, 0.9}, {1, 1, 0.9}, {2, 2, 0.9}};
  EXPECT_TRUE(mapping_is_exact(c, exact));
  std::vector<MatchPair> extra = exact;
  extra.push_back({3, 0, 0.8});
  EXPECT_FALSE(mapping_is_exact(c, extra));
  std::vector<MatchPair> missing(exact.begin(), exact.begin() + 2);
  EXPECT_FALSE(mapping_is_exact(c, missing));
  std::vector<MatchPair> swapped = {{0, 1, 0.9}, {1, 0, 0.9}, {2, 2, 0.9}};
  EXPECT_FALSE(mapping_is_exact(c, swapped));
}

TEST(EvaluateCase, NaiveDoubleAssignsWhereMbgmIsExact) {
  const ProtocolCase c = rp4_case();
  EXPECT_TRUE(evaluate_matrix(c, rp4_matrix(), Matcher::kMbgm, 0.7));
  EXPECT_FALSE(evaluate_matrix(c, rp4_matrix(), Matcher::kNaive, 0.7));

  LocalVectorStore store;
  for (std::size_t j = 0; j < 3; ++j) store.insert(c.references[j], axis(7, j));
  for (std::size_t i = 0; i < 3; ++i) store.insert(c.candidates[i], lean(7, i, 3 + i, 0.9));
  store.insert("d", lean(7, 0, 6, 0.8));
  EXPECT_TRUE(evaluate_case(c, Matcher::kMbgm, 0.7, store));
  EXPECT_FALSE(evaluate_case(c, Matcher::kNaive, 0.7, store));
}

TEST(EvaluateCase, MasksAgainstQuestion) {
  ProtocolCase c;
  c.question = "Is capitalism fair?";
  c.subtask = Subtask::kCp1;
  c.references = {"capitalism rewards effort"};
  c.candidates = {"capitalism exploits labor"};
  c.ground_truth = {{0, 0}};
  LocalVectorStore store;
  testing_support::put_masked(store, c.question, c.references[0], {1, 0});
  testing_support::put_masked(store, c.question, c.candidates[0], {1, 0});
  EXPECT_TRUE(evaluate_case(c, Matcher::kMbgm, 0.7, store));
  EvalOptions unmasked;
  unmasked.masking.enabled = false;
  EXPECT_THROW(evaluate_case(c, Matcher::kMbgm, 0.7, store, unmasked), Error);
}

TEST(EvaluateCase, MbgmVerdictIsPermutationInvariant) {
  SyntheticSuiteOptions opts;
  opts.seed = 3;
  opts.cases_per_subtask = 12;
  opts.unsolvable_fraction = 0.25;
  SyntheticSuite suite = make_synthetic_suite(opts);
  std::mt19937_64 rng(17);
  for (const ProtocolCase& c : suite.cases) {
    const bool verdict = evaluate_case(c, Matcher::kMbgm, 0.7, suite.store);
    for (int rep = 0; rep < 5; ++rep) {
      EXPECT_EQ(evaluate_case(permuted(c, rng), Matcher::kMbgm, 0.7, suite.store), verdict) << c.id;
    }
  }
}

TEST(RunProtocol, AllPassAndAggregates) {
  LocalVectorStore store;
  std::vector<ProtocolCase> cases;
  for (std::size_t k = 1; k <= 3; ++k) cases.push_back(copy_case(k, store, "p" + std::to_string(k)));
  ProtocolReport r = run_protocol(cases, Matcher::kMbgm, 0.7, store);
  EXPECT_EQ(r.per_subtask.size(), 3u);
  for (const auto& [s, res] : r.per_subtask) {
    EXPECT_EQ(res.accuracy, 1.0);
    EXPECT_EQ(res.n_cases, 1u);
    EXPECT_GE(res.mean_latency_s, 0.0);
  }
  EXPECT_EQ(r.per_subtask.count(Subtask::kCp4), 0u);
  EXPECT_EQ(r.avg1, 1.0);
  EXPECT_FALSE(r.avg2.has_value());
  EXPECT_EQ(r.total_avg, 1.0);
  EXPECT_EQ(r.verdicts, (std::vector<bool>{true, true, true}));
  EXPECT_EQ(r.per_case_latency_s.size(), 3u);
}

TEST(RunProtocol, EmptyCaseList) {
  LocalVectorStore store;
  ProtocolReport r = run_protocol({}, Matcher::kMbgm, 0.7, store);
  EXPECT_TRUE(r.per_subtask.empty());
  EXPECT_FALSE(r.total_avg.has_value());
}

TEST(RunProtocol, PlantedEightyPercentSuite) {
  SyntheticSuiteOptions opts;
  opts.unsolvable_fraction = 0.2;
  SyntheticSuite suite = make_synthetic_suite(opts);
  ASSERT_EQ(suite.cases.size(), 80u);
  ProtocolReport r = run_protocol(suite.cases, Matcher::kMbgm, 0.7, suite.store);
  for (const auto& [s, res] : r.per_subtask) EXPECT_EQ(res.accuracy, 0.8) << subtask_name(s);
  EXPECT_EQ(r.verdicts, suite.solvable);
  EXPECT_DOUBLE_EQ(*r.avg1, 0.8);
  EXPECT_DOUBLE_EQ(*r.avg2, 0.8);
  EXPECT_DOUBLE_EQ(*r.total_avg, 0.8);
}

TEST(RunProtocol, DeterministicAcrossRunsAndParallelism) {
  SyntheticSuiteOptions opts;
  opts.seed = 11;
  opts.unsolvable_fraction = 0.3;
  SyntheticSuite a = make_synthetic_suite(opts);
  SyntheticSuite b = make_synthetic_suite(opts);
  std::ostringstream ca, cb;
  write_cases_jsonl(ca, a.cases);
  write_cases_jsonl(cb, b.cases);
  EXPECT_EQ(ca.str(), cb.str());
  EvalOptions wide;
  wide.parallelism = 4;
  for (Matcher m : {Matcher::kMbgm, Matcher::kNaive}) {
    EXPECT_EQ(run_protocol(a.cases, m, 0.7, a.store).verdicts, run_protocol(a.cases, m, 0.7, a.store, wide).verdicts);
  }
  opts.seed = 12;
  std::ostringstream cc;
  write_cases_jsonl(cc, make_synthetic_suite(opts).cases);
  EXPECT_NE(ca.str(), cc.str());
}

TEST(Sweep, SaturatedStoreIsThresholdIndependent) {
  LocalVectorStore store;
  std::vector<ProtocolCase> cases;
  for (int i = 0; i < 4; ++i) {
    ProtocolCase c;
    c.question = "Q";
    c.subtask = Subtask::kCp1;
    c.references = {"same " + std::to_string(i), "other " + std::to_string(i)};
    c.candidates = {"twin " + std::to_string(i)};
    c.ground_truth = {{0, 0}};
    store.insert(c.references[0], {1, 0});
    store.insert(c.references[1], {0, 1});
    store.insert(c.candidates[0], {1, 0});
    cases.push_back(c);
  }
  const std::vector<double> grid = {-1.0, 0.0, 0.5, 0.99, 1.0};
  auto sweep = threshold_sweep(cases, Matcher::kMbgm, grid, store);
  ASSERT_EQ(sweep.size(), grid.size());
  for (const auto& [tau, report] : sweep) EXPECT_EQ(report.total_avg, 1.0) << tau;
}

TEST(Sweep, PlantedJumpAtConstructedBoundary) {
  SyntheticSuiteOptions opts;
  opts.cases_per_subtask = 5;
  SyntheticSuite suite = make_synthetic_suite(opts);
  std::vector<ProtocolCase> rp;
  for (const ProtocolCase& c : suite.cases)
    if (c.subtask == Subtask::kRp4 || c.subtask == Subtask::kRp5) rp.push_back(c);
  auto naive = threshold_sweep(rp, Matcher::kNaive, default_tau_grid(), suite.store);
  ASSERT_EQ(naive.size(), 16u);
  EXPECT_EQ(naive.begin()->first, 0.65);
  EXPECT_EQ(naive.rbegin()->first, 0.8);
  EXPECT_EQ(naive.at(0.68).total_avg, 0.0);
  EXPECT_EQ(naive.at(0.69).total_avg, 1.0);
  EXPECT_EQ(naive.at(0.72).total_avg, 1.0);
  EXPECT_EQ(naive.at(0.73).total_avg, 0.0);
  auto mbgm_sweep = threshold_sweep(suite.cases, Matcher::kMbgm, default_tau_grid(), suite.store);
  EXPECT_EQ(mbgm_sweep.at(0.65).total_avg, 1.0);
  EXPECT_EQ(mbgm_sweep.at(0.72).total_avg, 1.0);
  EXPECT_EQ(mbgm_sweep.at(0.73).total_avg, 0.0);
}

TEST(Sweep, EmptyGrid) {
  SyntheticSuite suite = make_synthetic_suite({});
  EXPECT_TRUE(threshold_sweep(suite.cases, Matcher::kMbgm, {}, suite.store).empty());
}

TEST(Sweep, AgreesWithIndividualRuns) {
  SyntheticSuiteOptions opts;
  opts.cases_per_subtask = 4;
  opts.unsolvable_fraction = 0.5;
  SyntheticSuite suite = make_synthetic_suite(opts);
  auto sweep = threshold_sweep(suite.cases, Matcher::kNaive, {0.6, 0.7, 0.75}, suite.store);
  for (const auto& [tau, report] : sweep) {
    EXPECT_EQ(report.verdicts, run_protocol(suite.cases, Matcher::kNaive, tau, suite.store).verdicts);
  }
}

TEST(Csv, ReportLayout) {
  LocalVectorStore store;
  std::vector<ProtocolCase> cases = {copy_case(2, store, "a")};
  ProtocolCase rp = rp4_case();
  store.insert("r0", axis(4, 0));
  store.insert("r1", axis(4, 1));
  store.insert("r2", axis(4, 2));
  store.insert("c0", axis(4, 0));
  store.insert("c1", axis(4, 3));
  store.insert("c2", axis(4, 2));
  store.insert("d", axis(4, 3));
  cases.push_back(rp);
  ProtocolReport r = run_protocol(cases, Matcher::kMbgm, 0.7, store);
  std::ostringstream out;
  write_report_csv(out, r);
  std::istringstream lines(out.str());
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line.substr(0, line.rfind(',')));
  EXPECT_EQ(rows, (std::vector<std::string>{"subtask,accuracy,n_cases", "cp2,1,1", "rp4,0,1", "avg1,1,1",
                                            "avg2,0,1", "total,0.5,2"}));
  std::ostringstream sweep;
  write_sweep_csv(sweep, threshold_sweep(cases, Matcher::kMbgm, {0.7}, store));
  EXPECT_EQ(sweep.str().substr(0, sweep.str().find('\n')), "tau,subtask,accuracy,n_cases,mean_latency_s");
  EXPECT_EQ(sweep.str().find("0.7,cp2,1,1,"), sweep.str().find('\n') + 1);
}

TEST(CasesJsonl, RoundTripAndErrors) {
  SyntheticSuite suite = make_synthetic_suite({});
  std::stringstream ss;
  write_cases_jsonl(ss, suite.cases);
  std::vector<ProtocolCase> back = read_cases_jsonl(ss);
  ASSERT_EQ(back.size(), suite.cases.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].candidates, suite.cases[i].candidates);
    EXPECT_EQ(back[i].references, suite.cases[i].references);
    EXPECT_EQ(back[i].ground_truth, suite.cases[i].ground_truth);
    EXPECT_EQ(back[i].subtask, suite.cases[i].subtask);
  }
  std::istringstream minimal(
      R"({"question": "q", "references": ["a", "b"], "candidates": ["a"], "ground_truth": {"0": 1}, "subtask": "cp1"})");
  auto one = read_cases_jsonl(minimal);
  EXPECT_EQ(one[0].ground_truth.at(0), 1u);
  for (const char* bad :
       {R"({"question": "q", "references": ["a"], "candidates": ["a"], "ground_truth": {"0": 0}, "subtask": "cp9"})",
        R"({"question": "q", "references": ["a"], "candidates": ["a"], "ground_truth": {"x": 0}, "subtask": "cp1"})",
        R"({"question": "q", "references": ["a"], "candidates": ["a", "b"], "ground_truth": {"0": 0}, "subtask": "cp1"})",
        "{"}) {
    std::istringstream in(bad);
    EXPECT_THROW(read_cases_jsonl(in), Error) << bad;
  }
}
