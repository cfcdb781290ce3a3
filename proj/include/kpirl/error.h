// Copyright 2026 The kpirl Authors
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

#ifndef KPIRL_ERROR_H_
#define KPIRL_ERROR_H_

#include <stdexcept>
#include <string>

namespace kpirl {

// Error categories shared by every module. The CLI maps them to exit codes.
enum class ErrorKind {
  kShape,          // tensor or manifest shape mismatch
  kUnknownNode,    // reference to a node that is not on the tape
  kNumericalDomain,
  kInput,          // malformed arguments
  kDivergence,     // non-finite loss, cost or gradient
  kFormat,         // malformed or truncated file
  kConfig,
  kIo,
  kEnvironment,    // environment configuration cannot produce valid data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kUnknownNode: return "unknown-node error";
    case ErrorKind::kNumericalDomain: return "numerical-domain error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kDivergence: return "divergence error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kEnvironment: return "environment-configuration error";
  }
  return "error";
}

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(ErrorKindName(kind)) + ": " + message);
}

}  // namespace kpirl

#endif  // KPIRL_ERROR_H_
