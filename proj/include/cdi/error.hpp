// Copyright 2026 The CDI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdi {

// Error categories raised by library operations. Verification outcomes are
// never reported through exceptions; they are ordinary result values.
enum class ErrorCode {
  kInvalidArgument,
  kFileNotFound,
  kFileUnreadable,
  kIo,
  kMalformed,
  kIncomplete,
  kKeyMismatch,
  kEntropy,
  kCrypto,
  kMissingReports,
  kDuplicateReport,
  kCycle,
  kOrphanReport,
  kPolicy,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kFileNotFound: return "file-not-found";
    case ErrorCode::kFileUnreadable: return "file-unreadable";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kIncomplete: return "incomplete";
    case ErrorCode::kKeyMismatch: return "key-mismatch";
    case ErrorCode::kEntropy: return "entropy";
    case ErrorCode::kCrypto: return "crypto";
    case ErrorCode::kMissingReports: return "missing-reports";
    case ErrorCode::kDuplicateReport: return "duplicate-report";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kOrphanReport: return "orphan-report";
    case ErrorCode::kPolicy: return "policy";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cdi
