#pragma once

namespace superglobal::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kIoError = 2;
inline constexpr int kValidationError = 3;
inline constexpr int kInternalError = 4;

int run(int argc, char** argv);

}  // namespace superglobal::cli
