#include "opreward/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "opreward/error.hpp"

namespace opreward {
namespace {

void check_inputs(const SimilarityMatrix& scores, double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) fail(ErrorCode::kInvalidArgument, "tau must be in [-1, 1]");
  if (scores.empty()) fail(ErrorCode::kEmptyInput, "similarity matrix is empty");
}

}  // namespace

MatchResult mbgm(const SimilarityMatrix& scores, double tau) {
  check_inputs(scores, tau);
  const std::size_t rows = scores.rows();
  const std::size_t cols = scores.cols();

  // Surviving entries, visited in descending score with row-major tie order.
  // The head of this order is always the global maximum of the survivors.
  std::vector<std::size_t> order;
  std::vector<char> alive(rows * cols, 0);
  for (std::size_t k = 0; k < rows * cols; ++k) {
    if (scores.scores()[k] >= tau) {
      alive[k] = 1;
      order.push_back(k);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores.scores()[a] > scores.scores()[b]; });

  std::vector<char> row_open(rows, 1);
  std::vector<char> col_open(cols, 1);
  auto survives = [&](std::size_t i, std::size_t j) { return row_open[i] && col_open[j] && alive[i * cols + j]; };

  MatchResult result;
  result.threshold_used = tau;
  for (std::size_t k : order) {
    const std::size_t i = k / cols;
    const std::size_t j = k % cols;
    if (!survives(i, j)) continue;
    const double v = scores.at(i, j);

    double row_max = v;
    for (std::size_t c = 0; c < cols; ++c) {
      if (survives(i, c)) row_max = std::max(row_max, scores.at(i, c));
    }
    double col_max = v;
    for (std::size_t r = 0; r < rows; ++r) {
      if (survives(r, j)) col_max = std::max(col_max, scores.at(r, j));
    }

    if (v == row_max && v == col_max) {
      result.pairs.push_back({i, j, v});
      row_open[i] = 0;
      col_open[j] = 0;
    } else {
      alive[k] = 0;
    }
  }

  for (std::size_t i = 0; i < rows; ++i) {
    if (row_open[i]) result.unmatched_candidates.push_back(i);
  }
  for (std::size_t j = 0; j < cols; ++j) {
    if (col_open[j]) result.unmatched_references.push_back(j);
  }
  return result;
}

std::vector<MatchPair> naive_match(const SimilarityMatrix& scores, double tau) {
  check_inputs(scores, tau);
  std::vector<MatchPair> pairs;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::span<const double> row = scores.row(i);
    const std::size_t best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (row[best] >= tau) pairs.push_back({i, best, row[best]});
  }
  return pairs;
}

MatchResult to_match_result(const SimilarityMatrix& scores, std::vector<MatchPair> pairs, double tau) {
  MatchResult result;
  result.threshold_used = tau;
  std::vector<char> row_used(scores.rows(), 0);
  std::vector<char> col_used(scores.cols(), 0);
  for (const MatchPair& p : pairs) {
    if (p.candidate >= scores.rows() || p.reference >= scores.cols()) {
      fail(ErrorCode::kInvalidArgument, "match pair index out of range");
    }
    row_used[p.candidate] = 1;
    col_used[p.reference] = 1;
  }
  result.pairs = std::move(pairs);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    if (!row_used[i]) result.unmatched_candidates.push_back(i);
  }
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    if (!col_used[j]) result.unmatched_references.push_back(j);
  }
  return result;
}

}  // namespace opreward
