#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace opreward {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyInput,
  kProviderUnavailable,  // transport failure, retryable
  kUnknownText,          // local vector store miss
  kDimensionMismatch,
  kInvalidVector,        // zero norm or non-finite components
  kJudgeFailure,
  kReplayMiss,
  kParse,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace opreward
