#include <gtest/gtest.h>

#include <cmath>

#include "opreward/error.hpp"
#include "opreward/reward.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace opreward;
using testing_support::axis;
using testing_support::lean;
using testing_support::perspective_response;

namespace {

const std::string kPrompt = "Q?";

PerspectiveSet references(const std::vector<std::string>& explanations) {
  PerspectiveSet set;
  set.row_id = "r";
  set.prompt = kPrompt;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    set.perspectives.push_back({"name" + std::to_string(i), explanations[i], Provenance::kOriginal});
  }
  return set;
}

std::string response(const std::vector<std::string>& explanations) {
  std::vector<std::pair<std::string, std::string>> lines;
  std::string summary = "Drawing on";
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    lines.emplace_back("name" + std::to_string(i), explanations[i]);
    summary += " name" + std::to_string(i);
  }
  return perspective_response(lines, summary + ".");
}

}  // namespace

TEST(Coverage, NoCandidates) {
  LocalVectorStore store;
  CoverageResult r = coverage_reward(parse_response(""), references({"a", "b", "c", "d", "e"}), RewardConfig{}, store);
  EXPECT_EQ(r.r_cov, 0.0);
  EXPECT_TRUE(r.match.pairs.empty());
  EXPECT_EQ(r.match.unmatched_references.size(), 5u);
}

TEST(Coverage, ThreeMutualBestOfFive) {
  LocalVectorStore store;
  const std::size_t dim = 8;
  for (std::size_t j = 0; j < 5; ++j) store.insert("ref " + std::to_string(j), axis(dim, j));
  for (std::size_t i = 0; i < 3; ++i) store.insert("cand " + std::to_string(i), lean(dim, i, 7, 0.95));
  CoverageResult r = coverage_reward(parse_response(response({"cand 0", "cand 1", "cand 2"})),
                                     references({"ref 0", "ref 1", "ref 2", "ref 3", "ref 4"}), RewardConfig{}, store);
  EXPECT_DOUBLE_EQ(r.r_cov, 0.6);
  ASSERT_EQ(r.match.pairs.size(), 3u);
  for (const MatchPair& p : r.match.pairs) EXPECT_EQ(p.candidate, p.reference);
}

TEST(Coverage, SelfMatchIsComplete) {
  LocalVectorStore store;
  const std::vector<std::string> texts = {"t0", "t1", "t2", "t3"};
  for (std::size_t j = 0; j < 4; ++j) store.insert(texts[j], axis(4, j));
  EXPECT_EQ(coverage_reward(parse_response(response(texts)), references(texts), RewardConfig{}, store).r_cov, 1.0);
}

TEST(Coverage, EmptyReferencesRejected) {
  LocalVectorStore store;
  EXPECT_THROW(coverage_reward(parse_response(""), references({}), RewardConfig{}, store), Error);
}

TEST(Uniqueness, AllDistinct) {
  LocalVectorStore store;
  const std::vector<std::string> texts = {"u0", "u1", "u2", "u3"};
  for (std::size_t j = 0; j < 4; ++j) store.insert(texts[j], axis(4, j));
  UniquenessResult u = uniqueness_reward(parse_response(response(texts)), RewardConfig{}, store);
  EXPECT_EQ(u.r_uniq, 1.0);
  EXPECT_EQ(u.cluster_count, 4u);
}

TEST(Uniqueness, ChainCollapsesTransitively) {
  // c1~c2 (0.8), c2~c3 (0.8), c1 vs c3 = 0.28.
  LocalVectorStore store;
  store.insert("c1", {1, 0, 0, 0});
  store.insert("c2", {0.8, 0.6, 0, 0});
  store.insert("c3", {0.28, 0.96, 0, 0});
  store.insert("c4", {0, 0, 1, 0});
  UniquenessResult u = uniqueness_reward(parse_response(response({"c1", "c2", "c3", "c4"})), RewardConfig{}, store);
  EXPECT_EQ(u.cluster_count, 2u);
  EXPECT_EQ(u.r_uniq, 0.5);
}

TEST(Uniqueness, SingletonAndEmpty) {
  LocalVectorStore store;
  store.insert("solo", {1, 0});
  EXPECT_EQ(uniqueness_reward(parse_response(response({"solo"})), RewardConfig{}, store).r_uniq, 1.0);
  UniquenessResult empty = uniqueness_reward(parse_response("nothing"), RewardConfig{}, store);
  EXPECT_EQ(empty.r_uniq, 0.0);
  EXPECT_TRUE(empty.degenerate);
}

TEST(Uniqueness, ComponentsMatchReachabilityOracle) {
  oracle::Gen gen(211);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = gen.index(1, 6);
    oracle::Matrix s(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s[i][j] = s[j][i] = static_cast<double>(gen.index(0, 10)) / 10.0;
    const double tau = gen.coin() ? 0.7 : 0.5;
    EXPECT_EQ(count_clusters(SimilarityMatrix::from_rows(s), tau), oracle::components(s, tau));
  }
}

TEST(Ladder, PrintedTables) {
  EXPECT_EQ(ladder_coverage(0.0), 0.0);
  EXPECT_EQ(ladder_coverage(0.1), 0.3);
  EXPECT_EQ(ladder_coverage(0.2), 0.6);
  EXPECT_EQ(ladder_coverage(0.4), 0.9);
  EXPECT_EQ(ladder_coverage(0.5), 0.9);
  EXPECT_EQ(ladder_coverage(0.6), 1.2);
  EXPECT_EQ(ladder_coverage(0.8), 1.5);
  EXPECT_EQ(ladder_coverage(1.0), 1.5);
  EXPECT_EQ(ladder_uniqueness(1.0), 0.3);
  EXPECT_EQ(ladder_uniqueness(0.9), 0.2);
  EXPECT_EQ(ladder_uniqueness(0.8), 0.1);
  EXPECT_EQ(ladder_uniqueness(0.7), 0.1);
  EXPECT_EQ(ladder_uniqueness(0.6), 0.0);
  EXPECT_EQ(ladder_uniqueness(0.0), 0.0);
}

TEST(Ladder, ScaleModes) {
  RewardConfig cfg;
  LadderTerms t = ladder_scale(0.5, 1.0, cfg);
  EXPECT_EQ(t.coverage, 0.9);
  EXPECT_EQ(t.uniqueness, 0.3);
  t = ladder_scale(0.0, 0.0, cfg);
  EXPECT_EQ(t.coverage, 0.0);
  EXPECT_EQ(t.uniqueness, 0.0);
  cfg.ladder_mode = LadderMode::kLinear;
  t = ladder_scale(0.5, 0.5, cfg);
  EXPECT_EQ(t.coverage, 0.75);
  EXPECT_EQ(t.uniqueness, 0.15);
  EXPECT_THROW(ladder_scale(1.1, 0.5, cfg), Error);
  EXPECT_THROW(ladder_scale(0.5, -0.1, RewardConfig{}), Error);
  EXPECT_THROW(ladder_coverage(std::nan("")), Error);
}

TEST(Ladder, MonotoneOnFineGrid) {
  double prev_c = -1.0, prev_u = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double r = i / 1000.0;
    EXPECT_GE(ladder_coverage(r), prev_c);
    EXPECT_GE(ladder_uniqueness(r), prev_u);
    prev_c = ladder_coverage(r);
    prev_u = ladder_uniqueness(r);
  }
}

TEST(ScoreResponse, MaximalResponseScoresTwo) {
  LocalVectorStore store;
  const std::vector<std::string> texts = {"m0", "m1", "m2", "m3", "m4"};
  for (std::size_t j = 0; j < texts.size(); ++j) store.insert(texts[j], axis(5, j));
  RewardBreakdown b = score_response(kPrompt, references(texts), response(texts), RewardConfig{}, store);
  EXPECT_EQ(b.final_reward, 2.0);
  EXPECT_EQ(b.ladder_cov, 1.5);
  EXPECT_EQ(b.ladder_uniq, 0.3);
  EXPECT_EQ(b.format.total, 0.2);
}

TEST(ScoreResponse, EmptyResponse) {
  LocalVectorStore store;
  RewardBreakdown b = score_response(kPrompt, references({"a"}), "", RewardConfig{}, store);
  EXPECT_EQ(b.final_reward, 0.0);
  EXPECT_TRUE(b.uniqueness_degenerate);
}

TEST(ScoreResponse, ComposedEngineeredStore) {
  LocalVectorStore store;
  const std::size_t dim = 8;
  for (std::size_t j = 0; j < 5; ++j) store.insert("ref " + std::to_string(j), axis(dim, j));
  for (std::size_t i = 0; i < 3; ++i) store.insert("cand " + std::to_string(i), lean(dim, i, 7, 0.95));
  RewardBreakdown b = score_response(kPrompt, references({"ref 0", "ref 1", "ref 2", "ref 3", "ref 4"}),
                                     response({"cand 0", "cand 1", "cand 2"}), RewardConfig{}, store);
  EXPECT_DOUBLE_EQ(b.r_cov, 0.6);
  EXPECT_EQ(b.r_uniq, 1.0);
  EXPECT_EQ(b.ladder_cov, 1.2);
  EXPECT_EQ(b.ladder_uniq, 0.3);
  EXPECT_EQ(b.format.total, 0.2);
  EXPECT_DOUBLE_EQ(b.final_reward, 1.7);
}

TEST(ScoreResponse, MasksAgainstPrompt) {
  const std::string prompt = "Is taxation theft?";
  LocalVectorStore store;
  testing_support::put_masked(store, prompt, "taxation funds roads", {1, 0});
  testing_support::put_masked(store, prompt, "taxation is coercive", {0, 1});
  PerspectiveSet refs = references({"taxation funds roads"});
  refs.prompt = prompt;
  RewardBreakdown b = score_response(prompt, refs, response({"taxation is coercive"}), RewardConfig{}, store);
  EXPECT_EQ(b.r_cov, 0.0);
  EXPECT_EQ(b.candidate_count, 1u);
}

TEST(ScoreResponse, ProviderErrorsPropagate) {
  LocalVectorStore store;
  EXPECT_THROW(score_response(kPrompt, references({"known"}), response({"unknown"}), RewardConfig{}, store), Error);
}

TEST(ScoreResponse, InvalidConfigRejected) {
  LocalVectorStore store;
  RewardConfig cfg;
  cfg.alpha_cov = -1.0;
  EXPECT_THROW(score_response(kPrompt, references({"a"}), "", cfg, store), Error);
  cfg = RewardConfig{};
  cfg.tau_dup = 1.5;
  EXPECT_THROW(score_response(kPrompt, references({"a"}), "", cfg, store), Error);
}

TEST(ScoreResponse, FuzzedBoundsAndComposition) {
  oracle::Gen gen(223);
  const std::size_t dim = 6;
  LocalVectorStore store;
  std::vector<std::string> pool;
  for (int k = 0; k < 12; ++k) {
    pool.push_back("pool text " + std::to_string(k));
    store.insert(pool.back(), gen.unit_vector(dim));
  }
  const PerspectiveSet refs = references({pool[0], pool[1], pool[2], pool[3], pool[4]});
  const std::vector<std::string> fragments = {"<core perspectives>", "</core perspectives>", "<summary>", "</summary>",
                                              "In the perspective of X, ", "garbage", "\n", ", "};
  for (int trial = 0; trial < 1000; ++trial) {
    std::string raw;
    if (gen.coin()) {
      std::vector<std::string> picks;
      for (std::size_t i = 0, n = gen.index(0, 7); i < n; ++i) picks.push_back(pool[gen.index(0, pool.size() - 1)]);
      raw = response(picks);
      if (gen.coin()) raw.insert(gen.index(0, raw.size()), fragments[gen.index(0, fragments.size() - 1)]);
    } else {
      for (std::size_t i = 0, n = gen.index(0, 12); i < n; ++i) {
        raw += gen.coin() ? fragments[gen.index(0, fragments.size() - 1)] : pool[gen.index(0, pool.size() - 1)];
      }
    }
    RewardConfig cfg;
    if (gen.coin()) cfg.ladder_mode = LadderMode::kLinear;
    RewardBreakdown b;
    try {
      b = score_response(kPrompt, refs, raw, cfg, store);
    } catch (const Error& e) {
      // Fragments can splice into a pool text, giving a store miss.
      EXPECT_EQ(e.code(), ErrorCode::kUnknownText);
      continue;
    }
    EXPECT_GE(b.final_reward, 0.0);
    EXPECT_LE(b.final_reward, 2.0);
    const LadderTerms t = ladder_scale(b.r_cov, b.r_uniq, cfg);
    EXPECT_NEAR(b.final_reward, t.coverage + t.uniqueness + b.format.total, 1e-12);
    EXPECT_EQ(b.r_cov, static_cast<double>(b.matched_reference_count) / 5.0);
    if (b.candidate_count > 0) {
      EXPECT_EQ(b.r_uniq, static_cast<double>(b.cluster_count) / static_cast<double>(b.candidate_count));
    }
    EXPECT_LE(b.matched_reference_count, std::min<std::size_t>(b.candidate_count, 5));
  }
}

TEST(ScoreResponse, MatchedCountNeverDropsWhenCandidateAdded) {
  oracle::Gen gen(227);
  const std::size_t dim = 6;
  int violations = 0;
  for (int trial = 0; trial < 300; ++trial) {
    LocalVectorStore store;
    std::vector<std::string> refs, cands;
    for (int j = 0; j < 4; ++j) {
      refs.push_back("r" + std::to_string(j));
      store.insert(refs.back(), gen.unit_vector(dim));
    }
    for (int i = 0; i < 5; ++i) {
      cands.push_back("c" + std::to_string(i));
      store.insert(cands.back(), gen.unit_vector(dim));
    }
    RewardConfig cfg;
    cfg.tau_match = 0.1;
    const std::vector<std::string> first4(cands.begin(), cands.begin() + 4);
    const auto before = coverage_reward(parse_response(response(first4)), references(refs), cfg, store);
    const auto after = coverage_reward(parse_response(response(cands)), references(refs), cfg, store);
    if (after.match.matched_reference_count() < before.match.matched_reference_count()) ++violations;
  }
  EXPECT_EQ(violations, 0);
}
