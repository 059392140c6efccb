#include "opreward/embedding.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <nlohmann/json.hpp>
#include <thread>
#include <tuple>
#include <unordered_set>

#include "opreward/error.hpp"
#include "opreward/text.hpp"
#include "opreward/url.hpp"

namespace opreward {

using nlohmann::json;

EmbeddingVector EmbeddingVector::normalized(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::kInvalidVector, "embedding has no components");
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidVector, "embedding has a non-finite component");
    sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) fail(ErrorCode::kInvalidVector, "embedding has zero norm");
  if (norm != 1.0) {
    for (double& v : values) v /= norm;
  }
  EmbeddingVector out;
  out.values_ = std::move(values);
  return out;
}

double EmbeddingVector::dot(const EmbeddingVector& other) const {
  if (other.dimension() != dimension()) {
    fail(ErrorCode::kDimensionMismatch, "cannot compare vectors of dimension " + std::to_string(dimension()) +
                                            " and " + std::to_string(other.dimension()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) s += values_[k] * other.values_[k];
  return s;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return std::clamp(a.dot(b), -1.0, 1.0); }

// ---------------------------------------------------------------------------

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> scores,
                                   std::vector<std::string> candidate_ids,
                                   std::vector<std::string> reference_ids)
    : rows_(rows),
      cols_(cols),
      scores_(std::move(scores)),
      candidate_ids_(std::move(candidate_ids)),
      reference_ids_(std::move(reference_ids)) {
  if (scores_.size() != rows_ * cols_) {
    fail(ErrorCode::kDimensionMismatch, "similarity matrix has " + std::to_string(scores_.size()) +
                                            " entries, expected " + std::to_string(rows_ * cols_));
  }
  for (std::size_t k = 0; k < scores_.size(); ++k) {
    const double v = scores_[k];
    if (std::isnan(v)) {
      fail(ErrorCode::kInvalidArgument, "similarity matrix entry (" + std::to_string(k / cols_) + ", " +
                                            std::to_string(k % cols_) + ") is NaN");
    }
    if (!(v >= -1.0 && v <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "similarity matrix entry (" + std::to_string(k / cols_) + ", " +
                                            std::to_string(k % cols_) + ") is outside [-1, 1]");
    }
  }
  if (candidate_ids_.empty()) {
    for (std::size_t i = 0; i < rows_; ++i) candidate_ids_.push_back(std::to_string(i));
  }
  if (reference_ids_.empty()) {
    for (std::size_t j = 0; j < cols_; ++j) reference_ids_.push_back(std::to_string(j));
  }
  if (candidate_ids_.size() != rows_ || reference_ids_.size() != cols_) {
    fail(ErrorCode::kDimensionMismatch, "similarity matrix ids do not match its shape");
  }
}

SimilarityMatrix SimilarityMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      fail(ErrorCode::kDimensionMismatch, "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                                              " entries, expected " + std::to_string(cols));
    }
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return SimilarityMatrix(rows.size(), cols, std::move(flat));
}

std::vector<std::vector<double>> SimilarityMatrix::to_rows() const {
  std::vector<std::vector<double>> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i].assign(row(i).begin(), row(i).end());
  return out;
}

SimilarityMatrix SimilarityMatrix::transposed() const {
  std::vector<double> t(scores_.size());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t[j * rows_ + i] = at(i, j);
  }
  return SimilarityMatrix(cols_, rows_, std::move(t), reference_ids_, candidate_ids_);
}

// ---------------------------------------------------------------------------

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",    "the",   "and",  "or",    "but",  "if",    "of",    "to",   "in",
      "on",   "at",    "by",    "for",  "with",  "from", "as",    "is",    "are",  "was",
      "were", "be",    "been",  "being", "it",   "its",  "this",  "that",  "these", "those",
      "he",   "she",   "they",  "them", "his",   "her",  "their", "we",    "you",  "i",
      "not",  "no",    "so",    "than", "then",  "there", "which", "who",  "what", "when",
  };
  return words;
}

void MaskingConfig::validate() const {
  if (placeholder.empty()) fail(ErrorCode::kInvalidArgument, "masking placeholder must not be empty");
  if (stopwords.count(placeholder) != 0 || stopwords.count(text::token_key(placeholder)) != 0) {
    fail(ErrorCode::kInvalidArgument, "masking placeholder must not be a stopword");
  }
}

std::vector<std::string> mask_prompt_keywords(std::string_view prompt, const std::vector<std::string>& sentences,
                                              const MaskingConfig& cfg) {
  cfg.validate();
  if (!cfg.enabled) return sentences;

  std::unordered_set<std::string> prompt_keys;
  const std::string prompt_nfc = text::nfc(prompt);
  for (const text::TokenSpan& span : text::whitespace_tokens(prompt_nfc)) {
    std::string key = text::token_key(std::string_view(prompt_nfc).substr(span.begin, span.end - span.begin));
    if (key.empty() || text::codepoint_count(key) < cfg.min_token_length || cfg.stopwords.count(key) != 0) continue;
    prompt_keys.insert(std::move(key));
  }

  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (const std::string& sentence : sentences) {
    if (prompt_keys.empty()) {
      out.push_back(sentence);
      continue;
    }
    std::string masked;
    masked.reserve(sentence.size());
    std::size_t cursor = 0;
    for (const text::TokenSpan& span : text::whitespace_tokens(sentence)) {
      std::string_view token = std::string_view(sentence).substr(span.begin, span.end - span.begin);
      masked.append(sentence, cursor, span.begin - cursor);
      if (token != cfg.placeholder && prompt_keys.count(text::token_key(token)) != 0) {
        masked += cfg.placeholder;
      } else {
        masked += token;
      }
      cursor = span.end;
    }
    masked.append(sentence, cursor, std::string::npos);
    out.push_back(std::move(masked));
  }
  return out;
}

// ---------------------------------------------------------------------------

LocalVectorStore LocalVectorStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open vector store " + path);
  return parse(in, path);
}

LocalVectorStore LocalVectorStore::parse(std::istream& in, const std::string& source_name) {
  LocalVectorStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("text") || !row["text"].is_string() || !row.contains("vector") ||
        !row["vector"].is_array()) {
      fail(ErrorCode::kParse, where + ": expected {\"text\": string, \"vector\": [numbers]}");
    }
    std::vector<double> values;
    values.reserve(row["vector"].size());
    for (const json& v : row["vector"]) {
      if (!v.is_number()) fail(ErrorCode::kParse, where + ": vector components must be numbers");
      values.push_back(v.get<double>());
    }
    try {
      store.insert(row["text"].get<std::string>(), std::move(values));
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return store;
}

void LocalVectorStore::insert(const std::string& text, std::vector<double> values) {
  EmbeddingVector v = EmbeddingVector::normalized(std::move(values));
  auto [it, inserted] = vectors_.insert_or_assign(text, std::move(v));
  if (inserted) order_.push_back(text);
}

void LocalVectorStore::write_jsonl(std::ostream& out) const {
  for (const std::string& text : order_) {
    const EmbeddingVector& v = vectors_.at(text);
    json row = {{"text", text}, {"vector", std::vector<double>(v.values().begin(), v.values().end())}};
    out << row.dump() << '\n';
  }
}

std::vector<EmbeddingVector> LocalVectorStore::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) {
    auto it = vectors_.find(t);
    if (it == vectors_.end()) fail(ErrorCode::kUnknownText, "text not in vector store: \"" + t + "\"");
    out.push_back(it->second);
  }
  return out;
}

std::string LocalVectorStore::describe() const { return "local-store(" + std::to_string(size()) + " texts)"; }

// ---------------------------------------------------------------------------

HttpEmbeddingProvider::HttpEmbeddingProvider(Options options) : options_(std::move(options)) {
  std::tie(host_, base_path_) = split_base_url(options_.url);
  if (options_.max_attempts < 1) options_.max_attempts = 1;
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed(std::span<const std::string> texts) const {
  const json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.retry_backoff * attempt);
    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(base_path_ + "/embed", payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
      continue;
    }
    if (res->status != 200) {
      std::string message = res->body;
      try {
        json err = json::parse(res->body);
        if (err.contains("error") && err["error"].is_string()) message = err["error"].get<std::string>();
      } catch (const json::exception&) {
      }
      fail(ErrorCode::kInvalidArgument, "embedding service rejected request (HTTP " +
                                            std::to_string(res->status) + "): " + message);
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kProviderUnavailable, std::string("embedding service returned invalid JSON: ") + e.what());
    }
    if (!reply.contains("vectors") || !reply["vectors"].is_array()) {
      fail(ErrorCode::kProviderUnavailable, "embedding service reply has no \"vectors\" array");
    }
    const json& vectors = reply["vectors"];
    if (vectors.size() != texts.size()) {
      fail(ErrorCode::kDimensionMismatch, "embedding service returned " + std::to_string(vectors.size()) +
                                              " vectors for " + std::to_string(texts.size()) + " texts");
    }
    std::size_t dim = 0;
    if (reply.contains("dim") && reply["dim"].is_number_integer()) dim = reply["dim"].get<std::size_t>();
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const json& v : vectors) {
      if (!v.is_array()) fail(ErrorCode::kProviderUnavailable, "embedding service returned a non-array vector");
      std::vector<double> values;
      values.reserve(v.size());
      for (const json& x : v) {
        if (!x.is_number()) fail(ErrorCode::kInvalidVector, "embedding service returned a non-numeric component");
        values.push_back(x.get<double>());
      }
      if (dim != 0 && values.size() != dim) {
        fail(ErrorCode::kDimensionMismatch, "embedding service vector has dimension " +
                                                std::to_string(values.size()) + ", declared " + std::to_string(dim));
      }
      out.push_back(EmbeddingVector::normalized(std::move(values)));
    }
    return out;
  }
  fail(ErrorCode::kProviderUnavailable, "embedding service at " + options_.url + " unavailable after " +
                                            std::to_string(options_.max_attempts) + " attempts (" + last_error + ")");
}

void HttpEmbeddingProvider::check_health() const {
  const std::vector<std::string> probe = {"healthcheck"};
  embed(probe);
}

std::string HttpEmbeddingProvider::describe() const { return "http(" + options_.url + ")"; }

// ---------------------------------------------------------------------------

std::vector<EmbeddingVector> embed(std::span<const std::string> texts, const EmbeddingProvider& provider) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) fail(ErrorCode::kEmptyInput, "text " + std::to_string(i) + " is empty");
  }
  if (texts.empty()) return {};
  std::vector<EmbeddingVector> out = provider.embed(texts);
  if (out.size() != texts.size()) {
    fail(ErrorCode::kDimensionMismatch, "provider returned " + std::to_string(out.size()) + " vectors for " +
                                            std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = out.front().dimension();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].dimension() != dim) {
      fail(ErrorCode::kDimensionMismatch, "provider returned dimension " + std::to_string(out[i].dimension()) +
                                              " for text " + std::to_string(i) + ", expected " + std::to_string(dim));
    }
  }
  return out;
}

SimilarityMatrix similarity_matrix(const std::vector<EmbeddingVector>& candidates,
                                   const std::vector<EmbeddingVector>& references,
                                   std::vector<std::string> candidate_ids, std::vector<std::string> reference_ids) {
  std::vector<double> scores;
  scores.reserve(candidates.size() * references.size());
  for (const EmbeddingVector& c : candidates) {
    for (const EmbeddingVector& r : references) scores.push_back(cosine(c, r));
  }
  return SimilarityMatrix(candidates.size(), references.size(), std::move(scores), std::move(candidate_ids),
                          std::move(reference_ids));
}

SimilarityMatrix similarity_matrix(const std::vector<std::string>& candidates,
                                   const std::vector<std::string>& references, std::string_view prompt,
                                   const MaskingConfig& cfg, const EmbeddingProvider& provider) {
  if (candidates.empty() || references.empty()) {
    fail(ErrorCode::kEmptyInput, "similarity matrix needs at least one candidate and one reference");
  }
  std::vector<std::string> batch = mask_prompt_keywords(prompt, candidates, cfg);
  std::vector<std::string> masked_refs = mask_prompt_keywords(prompt, references, cfg);
  batch.insert(batch.end(), masked_refs.begin(), masked_refs.end());
  std::vector<EmbeddingVector> vectors = embed(batch, provider);
  std::vector<EmbeddingVector> cand(vectors.begin(), vectors.begin() + static_cast<std::ptrdiff_t>(candidates.size()));
  std::vector<EmbeddingVector> refs(vectors.begin() + static_cast<std::ptrdiff_t>(candidates.size()), vectors.end());
  return similarity_matrix(cand, refs, candidates, references);
}

double op_mnrl_loss(std::span<const TripletEmbeddings> triplets, double margin, bool symmetric) {
  if (!(margin > 0.0) || !std::isfinite(margin)) fail(ErrorCode::kInvalidArgument, "margin must be > 0");
  if (triplets.empty()) fail(ErrorCode::kEmptyInput, "no triplets");
  bool any_negative = false;
  for (const TripletEmbeddings& t : triplets) any_negative = any_negative || !t.negatives.empty();
  if (!any_negative) fail(ErrorCode::kEmptyInput, "no anchor has a negative");

  auto directional = [&](bool swap) {
    double total = 0.0;
    for (const TripletEmbeddings& t : triplets) {
      const EmbeddingVector& a = swap ? t.positive : t.anchor;
      const EmbeddingVector& p = swap ? t.anchor : t.positive;
      const double positive_sim = a.dot(p);
      for (const EmbeddingVector& n : t.negatives) total += std::max(0.0, margin + a.dot(n) - positive_sim);
    }
    return total / static_cast<double>(triplets.size());
  };

  const double forward = directional(false);
  if (!symmetric) return forward;
  return 0.5 * (forward + directional(true));
}

}  // namespace opreward
