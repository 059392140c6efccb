#include "opreward/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "opreward/error.hpp"

namespace opreward {

std::vector<std::vector<double>> AdvantageSet::broadcast(std::span<const std::size_t> token_counts) const {
  if (token_counts.size() != per_response.size()) {
    fail(ErrorCode::kDimensionMismatch, "token count list does not match group size");
  }
  std::vector<std::vector<double>> out;
  out.reserve(per_response.size());
  for (std::size_t i = 0; i < per_response.size(); ++i) out.emplace_back(token_counts[i], per_response[i]);
  return out;
}

AdvantageSet group_advantages(std::span<const double> rewards, double std_epsilon) {
  if (rewards.empty()) fail(ErrorCode::kEmptyInput, "group has no rewards");
  if (!(std_epsilon > 0.0)) fail(ErrorCode::kInvalidArgument, "std_epsilon must be > 0");
  for (double r : rewards) {
    if (!std::isfinite(r)) fail(ErrorCode::kInvalidArgument, "rewards must be finite");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  const double std_dev = std::sqrt(var);

  AdvantageSet out;
  out.per_response.assign(rewards.size(), 0.0);
  if (std_dev < std_epsilon) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) out.per_response[i] = (rewards[i] - mean) / std_dev;
  return out;
}

namespace {

void check_logprobs(const TokenLogprobs& lp, std::size_t k, const char* which) {
  if (lp.size() != k) {
    fail(ErrorCode::kDimensionMismatch, std::string(which) + " log-probs cover " + std::to_string(lp.size()) +
                                            " responses, group has " + std::to_string(k));
  }
  for (const auto& tokens : lp) {
    for (double v : tokens) {
      if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, std::string(which) + " log-probs must be finite");
    }
  }
}

}  // namespace

GrpoObjective grpo_objective(const RolloutGroup& group, const AdvantageSet& advantages, double clip_epsilon,
                             double kl_beta, KlWeighting kl_weighting) {
  if (!group.logprobs_new || !group.logprobs_old || !group.logprobs_ref) {
    fail(ErrorCode::kInvalidArgument, "grpo_objective needs new, old and reference log-probs");
  }
  if (!(clip_epsilon > 0.0)) fail(ErrorCode::kInvalidArgument, "clip_epsilon must be > 0");
  if (!(kl_beta >= 0.0)) fail(ErrorCode::kInvalidArgument, "kl_beta must be >= 0");
  const std::size_t k = group.group_size();
  if (k == 0) fail(ErrorCode::kEmptyInput, "group has no responses");
  if (advantages.per_response.size() != k) {
    fail(ErrorCode::kDimensionMismatch, "advantage count does not match group size");
  }
  const TokenLogprobs& lp_new = *group.logprobs_new;
  const TokenLogprobs& lp_old = *group.logprobs_old;
  const TokenLogprobs& lp_ref = *group.logprobs_ref;
  check_logprobs(lp_new, k, "new");
  check_logprobs(lp_old, k, "old");
  check_logprobs(lp_ref, k, "ref");

  GrpoObjective out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t len = lp_new[i].size();
    if (len == 0) fail(ErrorCode::kEmptyInput, "response " + std::to_string(i) + " has no tokens");
    if (lp_old[i].size() != len || lp_ref[i].size() != len) {
      fail(ErrorCode::kDimensionMismatch, "response " + std::to_string(i) + " has mismatched token counts");
    }
    const double adv = advantages.per_response[i];
    double surrogate = 0.0;
    double ratio_sum = 0.0;
    double kl_sum = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double ratio = std::exp(lp_new[i][t] - lp_old[i][t]);
      const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
      surrogate += std::min(ratio * adv, clipped * adv);
      ratio_sum += ratio;
      const double d = lp_ref[i][t] - lp_new[i][t];
      kl_sum += std::exp(d) - d - 1.0;
    }
    const double inv_len = 1.0 / static_cast<double>(len);
    out.surrogate += surrogate * inv_len;
    out.mean_ratio += ratio_sum * inv_len;
    out.mean_kl += kl_weighting == KlWeighting::kTokenMean ? kl_sum * inv_len : kl_sum;
  }
  const double inv_k = 1.0 / static_cast<double>(k);
  out.surrogate *= inv_k;
  out.mean_ratio *= inv_k;
  out.mean_kl *= inv_k;
  out.objective = out.surrogate - kl_beta * out.mean_kl;
  return out;
}

}  // namespace opreward
