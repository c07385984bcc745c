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

#ifndef TPSLU_CHECKPOINT_HPP_
#define TPSLU_CHECKPOINT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpslu/model.hpp"

namespace tpslu {

// Binary layout: "TPSLUCKP", u32 version, model config as a JSON string,
// u32 tensor count, then per tensor its name, u32 rows, u32 cols and the
// row-major float64 values. All integers little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> SerializeCheckpoint(const ModelParams& params);
// Validates names and shapes against the stored config; throws kFormat.
ModelParams DeserializeCheckpoint(std::span<const std::uint8_t> bytes);

void SaveCheckpoint(const std::string& path, const ModelParams& params);
ModelParams LoadCheckpoint(const std::string& path);

}  // namespace tpslu

#endif  // TPSLU_CHECKPOINT_HPP_
