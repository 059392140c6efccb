#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace opreward {

using TokenLogprobs = std::vector<std::vector<double>>;  // [response][token]

struct RolloutGroup {
  std::string prompt_id;
  std::vector<double> rewards;
  std::optional<TokenLogprobs> logprobs_new;
  std::optional<TokenLogprobs> logprobs_old;
  std::optional<TokenLogprobs> logprobs_ref;

  std::size_t group_size() const { return rewards.size(); }
};

struct AdvantageSet {
  std::vector<double> per_response;
  bool degenerate = false;  // population std below epsilon; advantages are all 0

  // Token-level advantages: each response's value repeated over its tokens.
  std::vector<std::vector<double>> broadcast(std::span<const std::size_t> token_counts) const;
};

inline constexpr double kDefaultStdEpsilon = 1e-8;

// (R_i - mean) / population std. Throws Error(kEmptyInput) on no rewards.
AdvantageSet group_advantages(std::span<const double> rewards, double std_epsilon = kDefaultStdEpsilon);

enum class KlWeighting {
  kTokenMean,    // (1/K) sum_i (1/|a_i|) sum_t kl_it, same weighting as the surrogate
  kSequenceSum,  // (1/K) sum_i sum_t kl_it
};

struct GrpoObjective {
  double objective = 0.0;
  double surrogate = 0.0;  // clipped policy term before the KL penalty
  double mean_ratio = 0.0;
  double mean_kl = 0.0;
};

// Clipped surrogate minus kl_beta times the k3 estimate exp(d) - d - 1 with
// d = logp_ref - logp_new. Requires all three log-prob sets.
GrpoObjective grpo_objective(const RolloutGroup& group, const AdvantageSet& advantages, double clip_epsilon,
                             double kl_beta, KlWeighting kl_weighting = KlWeighting::kTokenMean);

}  // namespace opreward
