#include "opreward/error.hpp"

#include <iostream>
#include <mutex>

#include "opreward/log.hpp"

namespace opreward {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kProviderUnavailable: return "provider_unavailable";
    case ErrorCode::kUnknownText: return "unknown_text";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidVector: return "invalid_vector";
    case ErrorCode::kJudgeFailure: return "judge_failure";
    case ErrorCode::kReplayMiss: return "replay_miss";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

namespace {

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

LogSink& log_sink() {
  static LogSink sink;
  return sink;
}

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(log_mutex());
  log_sink() = std::move(sink);
}

void log_warning(std::string_view message) {
  std::lock_guard lock(log_mutex());
  if (log_sink()) {
    log_sink()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace opreward
