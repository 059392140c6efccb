#include "opreward/service.hpp"

#include <httplib.h>

#include <cmath>
#include <set>

#include "opreward/error.hpp"
#include "opreward/log.hpp"
#include "opreward/parallel.hpp"

namespace opreward {

using nlohmann::json;

std::string engine_version() { return OPREWARD_VERSION; }

namespace {

std::string join_fields(const std::vector<FieldError>& fields) {
  std::string out;
  for (const FieldError& f : fields) {
    if (!out.empty()) out += "; ";
    out += (f.field.empty() ? std::string("body") : f.field) + " " + f.message;
  }
  return out;
}

HttpReply json_reply(int status, const json& body) { return {status, body.dump()}; }

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw RequestError(400, {{"", std::string("invalid JSON: ") + e.what()}});
  }
}

bool is_nonblank_string(const json& v) {
  return v.is_string() && !v.get<std::string>().empty() &&
         v.get<std::string>().find_first_not_of(" \t\r\n") != std::string::npos;
}

}  // namespace

RequestError::RequestError(int status, std::vector<FieldError> fields)
    : Error(ErrorCode::kInvalidArgument, join_fields(fields)), status_(status), fields_(std::move(fields)) {}

json RequestError::to_json() const {
  json fields = json::array();
  for (const FieldError& f : fields_) fields.push_back({{"field", f.field}, {"message", f.message}});
  return {{"error", what()}, {"fields", fields}};
}

std::string error_body(const std::string& message, const std::vector<FieldError>& fields) {
  json list = json::array();
  for (const FieldError& f : fields) list.push_back({{"field", f.field}, {"message", f.message}});
  return json{{"error", message}, {"fields", list}}.dump();
}

ScoreRequest parse_score_request(const json& body) {
  std::vector<FieldError> errors;
  if (!body.is_object()) throw RequestError(400, {{"", "request body must be a JSON object"}});
  static const std::set<std::string> kKnown = {"prompt", "references", "responses", "config_overrides",
                                               "want_advantages"};
  for (const auto& [key, value] : body.items()) {
    if (kKnown.count(key) == 0) errors.push_back({key, "unknown field"});
  }

  ScoreRequest req;
  if (!body.contains("prompt") || !body["prompt"].is_string()) {
    errors.push_back({"prompt", "required string"});
  } else {
    req.prompt = body["prompt"].get<std::string>();
  }

  bool references_empty = false;
  if (!body.contains("references") || !body["references"].is_array()) {
    errors.push_back({"references", "required array of {name, explanation}"});
  } else {
    const json& refs = body["references"];
    references_empty = refs.empty();
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const std::string field = "references[" + std::to_string(i) + "]";
      const json& r = refs[i];
      if (!r.is_object()) {
        errors.push_back({field, "must be an object"});
        continue;
      }
      Perspective p;
      if (!r.contains("name") || !r["name"].is_string()) {
        errors.push_back({field + ".name", "required string"});
      } else {
        p.name = r["name"].get<std::string>();
      }
      if (!r.contains("explanation") || !is_nonblank_string(r["explanation"])) {
        errors.push_back({field + ".explanation", "required non-empty string"});
      } else {
        p.explanation = r["explanation"].get<std::string>();
      }
      req.references.perspectives.push_back(std::move(p));
    }
  }

  if (!body.contains("responses") || !body["responses"].is_array()) {
    errors.push_back({"responses", "required array of strings"});
  } else if (body["responses"].empty()) {
    errors.push_back({"responses", "must contain at least one response"});
  } else {
    const json& responses = body["responses"];
    for (std::size_t i = 0; i < responses.size(); ++i) {
      if (!responses[i].is_string()) {
        errors.push_back({"responses[" + std::to_string(i) + "]", "must be a string"});
      } else {
        req.responses.push_back(responses[i].get<std::string>());
      }
    }
  }

  if (body.contains("config_overrides")) {
    req.config_overrides = body["config_overrides"];
    RewardConfig probe;
    apply_config_overrides(probe, req.config_overrides, "config_overrides", errors);
  }

  if (body.contains("want_advantages")) {
    if (!body["want_advantages"].is_boolean()) {
      errors.push_back({"want_advantages", "must be a boolean"});
    } else {
      req.want_advantages = body["want_advantages"].get<bool>();
    }
  }

  if (!errors.empty()) throw RequestError(400, std::move(errors));
  if (references_empty) throw RequestError(422, {{"references", "must contain at least one reference"}});
  req.references.prompt = req.prompt;
  return req;
}

ScoreResponse score_request(const ScoreRequest& request, const RewardConfig& base, const EmbeddingProvider& provider,
                            std::size_t parallelism) {
  ScoreResponse out;
  out.engine_version = engine_version();
  out.config_echo = base;
  std::vector<FieldError> errors;
  apply_config_overrides(out.config_echo, request.config_overrides, "config_overrides", errors);
  if (!errors.empty()) throw RequestError(400, std::move(errors));
  out.config_echo.validate();
  if (request.references.perspectives.empty()) {
    throw RequestError(422, {{"references", "must contain at least one reference"}});
  }

  out.breakdowns.resize(request.responses.size());
  parallel_for(request.responses.size(), parallelism, [&](std::size_t i) {
    out.breakdowns[i] =
        score_response(request.prompt, request.references, request.responses[i], out.config_echo, provider);
  });
  if (request.want_advantages && !out.breakdowns.empty()) {
    std::vector<double> rewards;
    for (const RewardBreakdown& b : out.breakdowns) rewards.push_back(b.final_reward);
    out.advantages = group_advantages(rewards);
  }
  return out;
}

json to_json(const ScoreResponse& response) {
  json breakdowns = json::array();
  for (const RewardBreakdown& b : response.breakdowns) breakdowns.push_back(to_json(b));
  json out = {{"breakdowns", breakdowns},
              {"engine_version", response.engine_version},
              {"config_echo", to_json(response.config_echo)}};
  if (response.advantages) out["advantages"] = to_json(*response.advantages);
  return out;
}

MatchRequest parse_match_request(const json& body) {
  if (!body.is_object()) throw RequestError(400, {{"", "request body must be a JSON object"}});
  std::vector<FieldError> errors;
  for (const auto& [key, value] : body.items()) {
    if (key != "scores" && key != "tau" && key != "matcher") errors.push_back({key, "unknown field"});
  }
  MatchRequest req;
  std::vector<std::vector<double>> rows;
  if (!body.contains("scores") || !body["scores"].is_array() || body["scores"].empty()) {
    errors.push_back({"scores", "required non-empty array of rows"});
  } else {
    const json& scores = body["scores"];
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const std::string field = "scores[" + std::to_string(i) + "]";
      if (!scores[i].is_array() || scores[i].empty()) {
        errors.push_back({field, "must be a non-empty array of numbers"});
        continue;
      }
      std::vector<double> row;
      for (std::size_t j = 0; j < scores[i].size(); ++j) {
        const json& v = scores[i][j];
        const double x = v.is_number() ? v.get<double>() : NAN;
        if (!v.is_number() || !(x >= -1.0 && x <= 1.0)) {
          errors.push_back({field + "[" + std::to_string(j) + "]", "must be a number in [-1, 1]"});
        }
        row.push_back(x);
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        errors.push_back({field, "row length differs from scores[0]"});
      }
      rows.push_back(std::move(row));
    }
  }
  if (body.contains("tau")) {
    const json& t = body["tau"];
    if (!t.is_number() || !(t.get<double>() >= -1.0 && t.get<double>() <= 1.0)) {
      errors.push_back({"tau", "must be a number in [-1, 1]"});
    } else {
      req.tau = t.get<double>();
    }
  }
  if (body.contains("matcher")) {
    const json& m = body["matcher"];
    auto parsed = m.is_string() ? parse_matcher(m.get<std::string>()) : std::nullopt;
    if (!parsed) {
      errors.push_back({"matcher", "must be \"mbgm\" or \"naive\""});
    } else {
      req.matcher = *parsed;
    }
  }
  if (!errors.empty()) throw RequestError(400, std::move(errors));
  req.scores = SimilarityMatrix::from_rows(rows);
  return req;
}

json match_response(const MatchRequest& request) {
  if (request.matcher == Matcher::kMbgm) return to_json(mbgm(request.scores, request.tau));
  return to_json(to_match_result(request.scores, naive_match(request.scores, request.tau), request.tau));
}

ScoringService::ScoringService(const EmbeddingProvider& provider, ServiceOptions options)
    : provider_(provider), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  options_.base_config.validate();
  if (options_.workers == 0) options_.workers = 1;
  const std::size_t workers = options_.workers;
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };

  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server_->Post("/score", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_score(req.body));
  });
  server_->Post("/match", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_match(req.body));
  });
  server_->Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_healthz());
  });
  server_->Get("/version", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_version());
  });
}

ScoringService::~ScoringService() = default;

HttpReply ScoringService::handle_score(const std::string& body) const {
  try {
    const ScoreRequest request = parse_score_request(parse_body(body));
    return json_reply(200, to_json(score_request(request, options_.base_config, provider_,
                                                 options_.score_parallelism)));
  } catch (const RequestError& e) {
    return json_reply(e.status(), e.to_json());
  } catch (const Error& e) {
    log_warning(std::string("score: provider failure: ") + e.what());
    return {502, error_body(std::string(error_code_name(e.code())) + ": " + e.what())};
  } catch (const std::exception& e) {
    log_warning(std::string("score: internal error: ") + e.what());
    return {500, error_body(e.what())};
  }
}

HttpReply ScoringService::handle_match(const std::string& body) const {
  try {
    return json_reply(200, match_response(parse_match_request(parse_body(body))));
  } catch (const RequestError& e) {
    return json_reply(e.status(), e.to_json());
  } catch (const Error& e) {
    return {400, error_body(e.what())};
  } catch (const std::exception& e) {
    return {500, error_body(e.what())};
  }
}

HttpReply ScoringService::handle_healthz() const { return json_reply(200, {{"status", "ok"}}); }

HttpReply ScoringService::handle_version() const {
  return json_reply(200, {{"engine_version", engine_version()}, {"provider", provider_.describe()}});
}

int ScoringService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool ScoringService::listen() { return server_->listen_after_bind(); }

void ScoringService::stop() { server_->stop(); }

}  // namespace opreward
