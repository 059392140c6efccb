#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "opreward/embedding.hpp"
#include "opreward/error.hpp"
#include "opreward/format.hpp"
#include "opreward/llm_client.hpp"

namespace testing_support {

// Store entry for a text as it will look after prompt masking.
inline void put_masked(opreward::LocalVectorStore& store, const std::string& prompt, const std::string& text,
                       std::vector<double> v, const opreward::MaskingConfig& cfg = {}) {
  store.insert(opreward::mask_prompt_keywords(prompt, {text}, cfg)[0], std::move(v));
}

inline std::vector<double> axis(std::size_t dim, std::size_t k, double scale = 1.0) {
  std::vector<double> v(dim, 0.0);
  v[k] = scale;
  return v;
}

// Unit vector with cosine `s` to axis `k`, the remainder on axis `noise`.
inline std::vector<double> lean(std::size_t dim, std::size_t k, std::size_t noise, double s) {
  std::vector<double> v(dim, 0.0);
  v[k] = s;
  v[noise] = std::sqrt(1.0 - s * s);
  return v;
}

inline std::string perspective_response(const std::vector<std::pair<std::string, std::string>>& lines,
                                        const std::string& summary) {
  std::vector<opreward::PerspectiveLine> pl;
  for (std::size_t i = 0; i < lines.size(); ++i) pl.push_back({lines[i].first, lines[i].second, i});
  return opreward::render_response(pl, summary);
}

// Scripted judge. Votes are keyed by the unordered sentence pair; unknown
// pairs get the default reply. Counts calls and can fail transiently.
class ScriptedJudge : public opreward::LLMClient {
 public:
  explicit ScriptedJudge(std::string default_reply = "No") : default_reply_(std::move(default_reply)) {}

  void script(const std::string& a, const std::string& b, std::array<std::string, 3> replies) {
    replies_[key(a, b)] = std::move(replies);
  }
  void set_generate_reply(std::string reply) { generate_reply_ = std::move(reply); }
  void fail_first(int n) { transient_failures_ = n; }

  std::string judge(const opreward::JudgeQuery& q) const override {
    ++judge_calls_;
    if (transient_failures_.fetch_sub(1) > 0) {
      throw opreward::Error(opreward::ErrorCode::kProviderUnavailable, "scripted outage");
    }
    std::lock_guard lock(mutex_);
    asked_.push_back({q.sentence_a, q.sentence_b});
    auto it = replies_.find(key(q.sentence_a, q.sentence_b));
    if (it == replies_.end()) return default_reply_;
    return it->second[static_cast<std::size_t>(q.attempt)];
  }
  std::string generate(const std::string& prompt) const override {
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
    return generate_reply_;
  }
  std::string describe() const override { return "scripted"; }

  int judge_calls() const { return judge_calls_.load(); }
  std::vector<std::pair<std::string, std::string>> asked() const {
    std::lock_guard lock(mutex_);
    return asked_;
  }
  std::vector<std::string> prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }

 private:
  static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  std::string default_reply_;
  std::string generate_reply_;
  std::map<std::pair<std::string, std::string>, std::array<std::string, 3>> replies_;
  mutable std::atomic<int> transient_failures_{0};
  mutable std::atomic<int> judge_calls_{0};
  mutable std::mutex mutex_;
  mutable std::vector<std::pair<std::string, std::string>> asked_;
  mutable std::vector<std::string> prompts_;
};

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("opreward_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(file(name), std::ios::binary) << content;
    return file(name);
  }
  std::string read(const std::string& name) const {
    std::ifstream in(file(name), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
