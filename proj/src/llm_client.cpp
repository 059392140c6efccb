#include "opreward/llm_client.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>
#include <tuple>

#include "opreward/error.hpp"
#include "opreward/text.hpp"
#include "opreward/url.hpp"

namespace opreward {

using nlohmann::json;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIo, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0f];
  }
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

void check_attempt(int attempt) {
  if (attempt < 0 || attempt > 2) fail(ErrorCode::kInvalidArgument, "judge attempt must be 0, 1 or 2");
}

}  // namespace

std::string pair_hash(std::string_view sentence_a, std::string_view sentence_b) {
  std::string joined = text::nfc(sentence_a);
  joined += '\x1f';
  joined += text::nfc(sentence_b);
  return sha256_hex(joined);
}

std::string prompt_hash(std::string_view prompt) { return sha256_hex(text::nfc(prompt)); }

JudgeReply classify_judge_reply(std::string_view reply) {
  const std::string trimmed = text::trim(reply);
  if (starts_with_ci(trimmed, "yes")) return JudgeReply::kYes;
  if (starts_with_ci(trimmed, "no")) return JudgeReply::kNo;
  return JudgeReply::kUnrecognized;
}

Transcript Transcript::read(std::istream& in, const std::string& source_name) {
  Transcript t;
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
    if (!row.is_object()) fail(ErrorCode::kParse, where + ": expected an object");
    if (row.contains("pair_hash")) {
      if (!row["pair_hash"].is_string() || !row.contains("votes") || !row["votes"].is_array() ||
          row["votes"].size() != 3) {
        fail(ErrorCode::kParse, where + ": vote record needs \"pair_hash\" and three \"votes\"");
      }
      std::array<std::string, 3> votes;
      for (std::size_t i = 0; i < 3; ++i) {
        const json& v = row["votes"][i];
        if (!v.is_string()) fail(ErrorCode::kParse, where + ": votes must be strings");
        votes[i] = v.get<std::string>();
      }
      t.votes[row["pair_hash"].get<std::string>()] = votes;
    } else if (row.contains("prompt_hash")) {
      if (!row["prompt_hash"].is_string() || !row.contains("reply") || !row["reply"].is_string()) {
        fail(ErrorCode::kParse, where + ": reply record needs \"prompt_hash\" and \"reply\"");
      }
      t.replies[row["prompt_hash"].get<std::string>()] = row["reply"].get<std::string>();
    } else {
      fail(ErrorCode::kParse, where + ": unknown record (no pair_hash or prompt_hash)");
    }
  }
  return t;
}

Transcript Transcript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open transcript " + path);
  return read(in, path);
}

void Transcript::write(std::ostream& out) const {
  for (const auto& [hash, v] : votes) {
    out << json{{"pair_hash", hash}, {"votes", {v[0], v[1], v[2]}}}.dump() << '\n';
  }
  for (const auto& [hash, reply] : replies) {
    out << json{{"prompt_hash", hash}, {"reply", reply}}.dump() << '\n';
  }
}

std::string ReplayLLMClient::judge(const JudgeQuery& query) const {
  check_attempt(query.attempt);
  auto it = transcript_.votes.find(pair_hash(query.sentence_a, query.sentence_b));
  if (it == transcript_.votes.end()) {
    fail(ErrorCode::kReplayMiss, "no recorded votes for pair (\"" + query.sentence_a + "\", \"" +
                                     query.sentence_b + "\")");
  }
  return it->second[static_cast<std::size_t>(query.attempt)];
}

std::string ReplayLLMClient::generate(const std::string& prompt) const {
  auto it = transcript_.replies.find(prompt_hash(prompt));
  if (it == transcript_.replies.end()) fail(ErrorCode::kReplayMiss, "no recorded reply for prompt");
  return it->second;
}

std::string ReplayLLMClient::describe() const {
  return "replay(" + std::to_string(transcript_.votes.size()) + " pairs, " +
         std::to_string(transcript_.replies.size()) + " prompts)";
}

std::string RecordingLLMClient::judge(const JudgeQuery& query) const {
  check_attempt(query.attempt);
  std::string reply = inner_.judge(query);
  const std::string key = pair_hash(query.sentence_a, query.sentence_b);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = transcript_.votes.try_emplace(key);
  if (inserted) it->second = {"No", "No", "No"};
  it->second[static_cast<std::size_t>(query.attempt)] =
      classify_judge_reply(reply) == JudgeReply::kYes ? "Yes" : "No";
  return reply;
}

std::string RecordingLLMClient::generate(const std::string& prompt) const {
  std::string reply = inner_.generate(prompt);
  std::lock_guard lock(mutex_);
  transcript_.replies[prompt_hash(prompt)] = reply;
  return reply;
}

std::string RecordingLLMClient::describe() const { return "recording(" + inner_.describe() + ")"; }

Transcript RecordingLLMClient::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

HttpChatClient::HttpChatClient(Options options) : options_(std::move(options)) {
  std::tie(host_, base_path_) = split_base_url(options_.url);
  if (options_.max_attempts < 1) options_.max_attempts = 1;
}

std::string HttpChatClient::judge(const JudgeQuery& query) const { return generate(query.prompt); }

std::string HttpChatClient::generate(const std::string& prompt) const {
  const json body = {{"model", options_.model},
                     {"temperature", options_.temperature},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
  std::string last_error;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.retry_backoff * attempt);
    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(base_path_ + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      fail(ErrorCode::kJudgeFailure, "chat endpoint rejected request (HTTP " + std::to_string(res->status) +
                                         "): " + res->body);
    }
    try {
      const json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kJudgeFailure, std::string("unexpected chat completion payload: ") + e.what());
    }
  }
  fail(ErrorCode::kProviderUnavailable, "chat endpoint " + options_.url + " unavailable after " +
                                            std::to_string(options_.max_attempts) + " attempts (" + last_error + ")");
}

std::string HttpChatClient::describe() const { return "chat(" + options_.url + ", model=" + options_.model + ")"; }

}  // namespace opreward
