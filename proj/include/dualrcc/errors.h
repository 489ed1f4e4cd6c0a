// Copyright 2026 The dualrcc Authors. All Rights Reserved.
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

#ifndef DUALRCC_ERRORS_H_
#define DUALRCC_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualrcc {

enum class ErrorKind {
  kTruncated,
  kCorrupt,
  kVersionMismatch,
  kVocabularyMismatch,
  kModelMismatch,
  kUnknownSchedule,
  kCapExceeded,
  kOverflow,
};

const char* error_kind_name(ErrorKind kind);

// Raised on malformed streams and unencodable inputs. `offset_bits` is the
// stream position of the first violation when known.
class CodecError : public std::runtime_error {
 public:
  CodecError(ErrorKind kind, const std::string& message,
             size_t offset_bits = 0)
      : std::runtime_error(message), kind_(kind), offset_bits_(offset_bits) {}

  ErrorKind kind() const { return kind_; }
  size_t offset_bits() const { return offset_bits_; }

 private:
  ErrorKind kind_;
  size_t offset_bits_;
};

}  // namespace dualrcc

#endif  // DUALRCC_ERRORS_H_
