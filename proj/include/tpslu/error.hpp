// Copyright (c) 2026 The tpslu Authors
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

#ifndef TPSLU_ERROR_HPP_
#define TPSLU_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace tpslu {

// Numbering matches tpslu_status in tpslu.h.
enum class ErrorCode {
  kInvalidArgument = 1,
  kParse = 2,
  kIo = 3,
  kConfig = 4,
  kNumeric = 5,
  kContract = 6,
  kFormat = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

const char* ErrorCodeName(ErrorCode code);

}  // namespace tpslu

#endif  // TPSLU_ERROR_HPP_
