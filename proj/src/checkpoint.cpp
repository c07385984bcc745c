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

#include "tpslu/checkpoint.hpp"

#include <cstring>

#include "tpslu/bytes.hpp"
#include "tpslu/config.hpp"
#include "tpslu/error.hpp"

namespace tpslu {

namespace {

constexpr char kMagic[8] = {'T', 'P', 'S', 'L', 'U', 'C', 'K', 'P'};

[[noreturn]] void Bad(const std::string& msg) {
  throw Error(ErrorCode::kFormat, "checkpoint: " + msg);
}

}  // namespace

std::vector<std::uint8_t> SerializeCheckpoint(const ModelParams& params) {
  ByteWriter w;
  w.Bytes({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic});
  w.U32(kCheckpointVersion);
  w.Str(ModelConfigToJson(params.config));
  std::uint32_t count = 0;
  params.ForEach([&](const std::string&, const Matrix&) { ++count; });
  w.U32(count);
  params.ForEach([&](const std::string& name, const Matrix& m) {
    w.Str(name);
    w.U32(static_cast<std::uint32_t>(m.rows()));
    w.U32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.F64(m.data()[i]);
  });
  return w.Release();
}

ModelParams DeserializeCheckpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.Bytes(sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) Bad("bad magic");
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) Bad("unsupported version " + std::to_string(version));
  ModelConfig cfg = ModelConfigFromJson(r.Str());
  try {
    cfg.Validate();
  } catch (const Error& e) {
    Bad(e.what());
  }

  // The expected tensor list comes from a zero model of the stored config.
  CounterRng unused(0);
  ModelParams params = ModelParams::ZerosLike(ModelParams::Initialize(cfg, unused));
  std::uint32_t expected = 0;
  params.ForEach([&](const std::string&, const Matrix&) { ++expected; });
  const std::uint32_t count = r.U32();
  if (count != expected) {
    Bad("expected " + std::to_string(expected) + " tensors, found " + std::to_string(count));
  }
  params.ForEach([&](const std::string& name, Matrix& m) {
    const std::string stored = r.Str();
    if (stored != name) Bad("expected tensor " + name + ", found " + stored);
    const std::uint32_t rows = r.U32(), cols = r.U32();
    if (rows != m.rows() || cols != m.cols()) Bad("shape mismatch for tensor " + name);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.F64();
  });
  if (!r.done()) Bad("trailing bytes");
  return params;
}

void SaveCheckpoint(const std::string& path, const ModelParams& params) {
  WriteFileBytes(path, SerializeCheckpoint(params));
}

ModelParams LoadCheckpoint(const std::string& path) { return DeserializeCheckpoint(ReadFileBytes(path)); }

}  // namespace tpslu
