#include "superglobal/error.h"

namespace superglobal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NegativeActivation: return "NegativeActivation";
    case ErrorCode::EmptyScaleSet: return "EmptyScaleSet";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateRank: return "DuplicateRank";
    case ErrorCode::MissingQueryResult: return "MissingQueryResult";
    case ErrorCode::EmptyBracket: return "EmptyBracket";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
      return ErrorClass::Io;
    case ErrorCode::Internal:
      return ErrorClass::Internal;
    default:
      return ErrorClass::Validation;
  }
}

}  // namespace superglobal
