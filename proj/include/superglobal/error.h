#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace superglobal {

enum class ErrorCode {
  // validation
  ZeroVector,
  DimMismatch,
  NegativeActivation,
  EmptyScaleSet,
  DuplicateName,
  KTooLarge,
  PoolTooSmall,
  EmptyInput,
  DuplicateRank,
  MissingQueryResult,
  EmptyBracket,
  InvalidArgument,
  // file format
  BadMagic,
  TruncatedPayload,
  UnsupportedDtype,
  // environment
  Io,
  Internal,
};

std::string_view to_string(ErrorCode code);

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorClass { Io, Validation, Internal };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace superglobal
