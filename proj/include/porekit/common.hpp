// Copyright 2026 The Porekit Authors
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

#ifndef POREKIT_COMMON_HPP_
#define POREKIT_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace porekit {

// Error taxonomy, mapped to CLI exit codes (1 usage, 2 data, 3 numeric).
enum class ErrorKind {
  kInvalidArgument,  // bad caller input
  kInvalidShape,     // tensor/image extent mismatch
  kInvalidData,      // dataset or manifest problems
  kFormat,           // file parsing / serialization
  kNumeric,          // non-finite values, degenerate geometry
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

#define PK_CHECK(cond, kind, msg)          \
  do {                                     \
    if (!(cond)) ::porekit::fail(kind, msg); \
  } while (0)

}  // namespace porekit

#endif  // POREKIT_COMMON_HPP_
