// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ernetcl {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShape,
  kRank,
  kRange,
  kConfig,
  kLabel,
  kParse,
  kFormat,
  kEmpty,
  kDeterminism,
  kIo,
};

/// Exception carried through the C++ core. The C API maps code() onto its
/// status enum one-to-one.
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

}  // namespace ernetcl
