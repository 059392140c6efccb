#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace opreward {

// A unit-length embedding. Construction always normalizes.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  // Throws Error(kInvalidVector) for empty, zero-norm or non-finite input.
  static EmbeddingVector normalized(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }

  // Throws Error(kDimensionMismatch).
  double dot(const EmbeddingVector& other) const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

// Cosine similarity of two unit vectors, clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Row-major |C| x |R| matrix of similarities in [-1, 1]. NaN, infinities and
// out-of-range entries are rejected at construction.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> scores,
                   std::vector<std::string> candidate_ids = {},
                   std::vector<std::string> reference_ids = {});

  static SimilarityMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double at(std::size_t i, std::size_t j) const { return scores_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(scores_).subspan(i * cols_, cols_);
  }
  const std::vector<double>& scores() const { return scores_; }
  std::vector<std::vector<double>> to_rows() const;

  const std::vector<std::string>& candidate_ids() const { return candidate_ids_; }
  const std::vector<std::string>& reference_ids() const { return reference_ids_; }

  SimilarityMatrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> scores_;
  std::vector<std::string> candidate_ids_;
  std::vector<std::string> reference_ids_;
};

const std::set<std::string>& default_stopwords();

struct MaskingConfig {
  bool enabled = true;
  std::string placeholder = "<X>";
  std::size_t min_token_length = 4;
  std::set<std::string> stopwords = default_stopwords();

  // Throws Error(kInvalidArgument) if the placeholder is empty or a stopword.
  void validate() const;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // One unit vector per text, same order. Implementations must be safe to
  // call from several threads at once.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;

  // Throws if the provider cannot serve requests.
  virtual void check_health() const {}

  virtual std::string describe() const = 0;
};

// Exact-text lookup table loaded from JSONL rows {"text": ..., "vector": [...]}.
// Duplicate texts: the last row wins. Immutable after load.
class LocalVectorStore : public EmbeddingProvider {
 public:
  LocalVectorStore() = default;

  static LocalVectorStore load(const std::string& path);
  static LocalVectorStore parse(std::istream& in, const std::string& source_name = "<stream>");

  void insert(const std::string& text, std::vector<double> values);
  bool contains(const std::string& text) const { return vectors_.count(text) != 0; }
  std::size_t size() const { return vectors_.size(); }

  void write_jsonl(std::ostream& out) const;

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  std::string describe() const override;

 private:
  std::unordered_map<std::string, EmbeddingVector> vectors_;
  std::vector<std::string> order_;  // first-insertion order, for stable output
};

// Client for the embedding sidecar: POST {base}/embed {"texts": [...]}
//   -> {"vectors": [[...]], "dim": n}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  struct Options {
    std::string url;  // e.g. http://127.0.0.1:8090
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
    std::chrono::milliseconds retry_backoff{200};
  };

  explicit HttpEmbeddingProvider(Options options);

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  void check_health() const override;
  std::string describe() const override;

 private:
  Options options_;
  std::string host_;       // scheme://host:port
  std::string base_path_;  // "" or "/prefix"
};

// Validates input and provider output: non-empty strings in, one vector per
// text out, one shared dimension.
std::vector<EmbeddingVector> embed(std::span<const std::string> texts, const EmbeddingProvider& provider);

// Replaces sentence tokens that also occur in the prompt (after lowercasing
// and stripping punctuation) with the placeholder, unless they are short or
// stopwords. Whitespace and token count are preserved.
std::vector<std::string> mask_prompt_keywords(std::string_view prompt,
                                              const std::vector<std::string>& sentences,
                                              const MaskingConfig& cfg);

SimilarityMatrix similarity_matrix(const std::vector<EmbeddingVector>& candidates,
                                   const std::vector<EmbeddingVector>& references,
                                   std::vector<std::string> candidate_ids = {},
                                   std::vector<std::string> reference_ids = {});

// Masks both sides against the prompt, embeds in one batch and fills cosines.
SimilarityMatrix similarity_matrix(const std::vector<std::string>& candidates,
                                   const std::vector<std::string>& references,
                                   std::string_view prompt, const MaskingConfig& cfg,
                                   const EmbeddingProvider& provider);

struct TripletEmbeddings {
  EmbeddingVector anchor;
  EmbeddingVector positive;
  std::vector<EmbeddingVector> negatives;
};

// Mean over anchors of sum_j max(0, margin + f(a, n_j) - f(a, p)). With
// `symmetric`, averaged with the same loss computed with anchor and positive
// swapped. Value only; no gradients.
double op_mnrl_loss(std::span<const TripletEmbeddings> triplets, double margin, bool symmetric);

}  // namespace opreward
