#pragma once

#include <stdexcept>
#include <string>

namespace amoa {

enum class ErrorCode {
  // roster / model validation
  kDuplicateId,
  kMissingRole,
  kTooFewCollaborators,
  kInvalidArgument,
  // backend
  kTimeout,
  kTransport,
  kRemoteStatus,
  kEmptyCompletion,
  kMissingFixture,
  kWriteFailure,
  // templates
  kMalformed,
  // residual / stack
  kOutOfOrder,
  kPrecondition,
  // pipeline
  kDeadlineExceeded,
  // config / cli inputs
  kConfig,
  kParse,
};

const char* to_string(ErrorCode code);

/// Every failure the engine raises carries one of the codes above so callers
/// (the CLI in particular) can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace amoa
