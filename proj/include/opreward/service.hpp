#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "opreward/embedding.hpp"
#include "opreward/error.hpp"
#include "opreward/eval.hpp"
#include "opreward/grpo.hpp"
#include "opreward/json_io.hpp"
#include "opreward/reward.hpp"

namespace httplib {
class Server;
}

namespace opreward {

std::string engine_version();

struct ScoreRequest {
  std::string prompt;
  PerspectiveSet references;
  std::vector<std::string> responses;
  nlohmann::json config_overrides;  // partial RewardConfig, or null
  bool want_advantages = false;
};

struct ScoreResponse {
  std::vector<RewardBreakdown> breakdowns;
  std::optional<AdvantageSet> advantages;
  std::string engine_version;
  RewardConfig config_echo;
};

// A request that cannot be served as sent. status is 400 (schema) or 422
// (empty references).
class RequestError : public Error {
 public:
  RequestError(int status, std::vector<FieldError> fields);

  int status() const { return status_; }
  const std::vector<FieldError>& fields() const { return fields_; }
  nlohmann::json to_json() const;

 private:
  int status_;
  std::vector<FieldError> fields_;
};

// {"prompt", "references": [{"name", "explanation"}], "responses": [...],
//  "config_overrides": {...}, "want_advantages": bool}
ScoreRequest parse_score_request(const nlohmann::json& body);

// Resolves the config (overrides on top of `base`), scores every response and
// optionally adds group advantages.
ScoreResponse score_request(const ScoreRequest& request, const RewardConfig& base, const EmbeddingProvider& provider,
                            std::size_t parallelism = 1);

nlohmann::json to_json(const ScoreResponse& response);

struct MatchRequest {
  SimilarityMatrix scores;
  double tau = kDefaultMatchThreshold;
  Matcher matcher = Matcher::kMbgm;
};

// {"scores": [[...]], "tau": 0.7, "matcher": "mbgm"|"naive"}; tau and
// matcher are optional.
MatchRequest parse_match_request(const nlohmann::json& body);
nlohmann::json match_response(const MatchRequest& request);

struct HttpReply {
  int status = 200;
  std::string body;
};

struct ServiceOptions {
  RewardConfig base_config;
  std::size_t workers = 4;
  std::size_t score_parallelism = 1;
};

// Stateless request handling plus an HTTP front end:
//   POST /score, POST /match, GET /healthz, GET /version.
class ScoringService {
 public:
  ScoringService(const EmbeddingProvider& provider, ServiceOptions options);
  ~ScoringService();

  ScoringService(const ScoringService&) = delete;
  ScoringService& operator=(const ScoringService&) = delete;

  HttpReply handle_score(const std::string& body) const;
  HttpReply handle_match(const std::string& body) const;
  HttpReply handle_healthz() const;
  HttpReply handle_version() const;

  // Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  // Serves until stop(); in-flight requests finish before it returns.
  bool listen();
  void stop();

 private:
  const EmbeddingProvider& provider_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

// Body of every error reply: {"error": message, "fields": [{"field", "message"}]}.
std::string error_body(const std::string& message, const std::vector<FieldError>& fields = {});

}  // namespace opreward
