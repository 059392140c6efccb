#pragma once

#include <array>
#include <chrono>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace opreward {

// One of the three votes asked for a sentence pair.
struct JudgeQuery {
  std::string sentence_a;
  std::string sentence_b;
  int attempt = 0;  // 0, 1 or 2
  std::string prompt;
};

// Text-in, text-out language model boundary. Implementations must be safe to
// call concurrently.
class LLMClient {
 public:
  virtual ~LLMClient() = default;

  // Raw reply to a pairwise duplicate question.
  virtual std::string judge(const JudgeQuery& query) const = 0;
  // Raw reply to a free-form prompt (augmentation).
  virtual std::string generate(const std::string& prompt) const = 0;
  virtual std::string describe() const = 0;
};

// Hex SHA-256 of NFC(a) + 0x1F + NFC(b). Order matters.
std::string pair_hash(std::string_view sentence_a, std::string_view sentence_b);
// Hex SHA-256 of NFC(prompt).
std::string prompt_hash(std::string_view prompt);

// "Yes"/"No" after trimming, case-insensitive prefix. Anything else is
// unrecognized.
enum class JudgeReply { kYes, kNo, kUnrecognized };
JudgeReply classify_judge_reply(std::string_view reply);

// Transcript JSONL, one record per line:
//   {"pair_hash": "...", "votes": ["Yes", "No", "Yes"]}
//   {"prompt_hash": "...", "reply": "..."}
struct Transcript {
  std::map<std::string, std::array<std::string, 3>> votes;
  std::map<std::string, std::string> replies;

  static Transcript read(std::istream& in, const std::string& source_name = "<stream>");
  static Transcript load(const std::string& path);
  // Sorted by hash, votes first.
  void write(std::ostream& out) const;
};

// Answers from a recorded transcript. Unknown pairs/prompts throw
// Error(kReplayMiss).
class ReplayLLMClient : public LLMClient {
 public:
  explicit ReplayLLMClient(Transcript transcript) : transcript_(std::move(transcript)) {}

  std::string judge(const JudgeQuery& query) const override;
  std::string generate(const std::string& prompt) const override;
  std::string describe() const override;

 private:
  Transcript transcript_;
};

// Forwards to another client and records every answer. Votes are stored
// normalized to "Yes"/"No", so a replay reproduces the same decisions.
class RecordingLLMClient : public LLMClient {
 public:
  explicit RecordingLLMClient(const LLMClient& inner) : inner_(inner) {}

  std::string judge(const JudgeQuery& query) const override;
  std::string generate(const std::string& prompt) const override;
  std::string describe() const override;

  Transcript transcript() const;

 private:
  const LLMClient& inner_;
  mutable std::mutex mutex_;
  mutable Transcript transcript_;
};

// OpenAI-style chat completions: POST {url}/chat/completions with a single
// user message; the reply is choices[0].message.content.
class HttpChatClient : public LLMClient {
 public:
  struct Options {
    std::string url;
    std::string model = "default";
    std::string api_key;  // sent as a bearer token when non-empty
    double temperature = 0.0;
    std::chrono::milliseconds timeout{60000};
    int max_attempts = 3;
    std::chrono::milliseconds retry_backoff{500};
  };

  explicit HttpChatClient(Options options);

  std::string judge(const JudgeQuery& query) const override;
  std::string generate(const std::string& prompt) const override;
  std::string describe() const override;

 private:
  Options options_;
  std::string host_;
  std::string base_path_;
};

}  // namespace opreward
