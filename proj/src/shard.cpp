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

#include <fstream>
#include <iterator>

#include "tpslu/bytes.hpp"
#include "tpslu/pretraindata.hpp"

namespace tpslu {
namespace {

constexpr char kShardMagic[4] = {'T', 'P', 'S', 'H'};

void PutIds(ByteWriter& w, const std::vector<std::int32_t>& v) {
  w.U32(static_cast<std::uint32_t>(v.size()));
  for (auto x : v) w.I32(x);
}

std::vector<std::int32_t> GetIds(ByteReader& r) {
  std::vector<std::int32_t> v(r.U32());
  for (auto& x : v) x = r.I32();
  return v;
}

void PutSpans(ByteWriter& w, const std::vector<Span>& spans) {
  w.U32(static_cast<std::uint32_t>(spans.size()));
  for (const auto& s : spans) {
    w.I32(s.begin);
    w.I32(s.end);
  }
}

std::vector<Span> GetSpans(ByteReader& r) {
  std::vector<Span> v(r.U32());
  for (auto& s : v) {
    s.begin = r.I32();
    s.end = r.I32();
  }
  return v;
}

void PutTargets(ByteWriter& w, const std::map<std::int32_t, TokenId>& t) {
  w.U32(static_cast<std::uint32_t>(t.size()));
  for (const auto& [pos, id] : t) {
    w.I32(pos);
    w.I32(id);
  }
}

std::map<std::int32_t, TokenId> GetTargets(ByteReader& r) {
  std::map<std::int32_t, TokenId> t;
  const std::uint32_t n = r.U32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::int32_t pos = r.I32();
    t.emplace(pos, r.I32());
  }
  return t;
}

}  // namespace

std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

std::vector<std::uint8_t> SerializeExample(const PretrainExample& ex) {
  const EncodedExample& e = ex.encoded;
  ByteWriter w;
  PutIds(w, e.input_ids);
  PutIds(w, e.segment_ids);
  PutIds(w, e.position_ids);
  PutSpans(w, {e.word_region, e.phone_region});
  PutSpans(w, e.word_spans);
  PutSpans(w, e.phone_word_spans);
  w.I32(e.wsa_label ? static_cast<std::int32_t>(*e.wsa_label) : -1);
  PutTargets(w, e.mlm_targets);
  PutTargets(w, e.msm_targets);
  w.U8(ex.loss_flags);
  return w.Release();
}

PretrainExample DeserializeExample(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PretrainExample ex;
  EncodedExample& e = ex.encoded;
  e.input_ids = GetIds(r);
  e.segment_ids = GetIds(r);
  e.position_ids = GetIds(r);
  auto regions = GetSpans(r);
  if (regions.size() != 2) throw Error(ErrorCode::kFormat, "bad region count in shard record");
  e.word_region = regions[0];
  e.phone_region = regions[1];
  e.word_spans = GetSpans(r);
  e.phone_word_spans = GetSpans(r);
  const std::int32_t wsa = r.I32();
  if (wsa < -1 || wsa > 1) throw Error(ErrorCode::kFormat, "bad WSA label in shard record");
  if (wsa >= 0) e.wsa_label = static_cast<WsaLabel>(wsa);
  e.mlm_targets = GetTargets(r);
  e.msm_targets = GetTargets(r);
  ex.loss_flags = r.U8();
  if (!r.done()) throw Error(ErrorCode::kFormat, "trailing bytes in shard record");
  if (e.segment_ids.size() != e.input_ids.size() || e.position_ids.size() != e.input_ids.size()) {
    throw Error(ErrorCode::kFormat, "inconsistent sequence lengths in shard record");
  }
  return ex;
}

void WriteShard(const std::string& path, std::span<const PretrainExample> examples) {
  ByteWriter w;
  for (char c : kShardMagic) w.U8(static_cast<std::uint8_t>(c));
  w.U8(kShardFormatVersion);
  w.U64(examples.size());
  for (const auto& ex : examples) {
    auto rec = SerializeExample(ex);
    w.U32(static_cast<std::uint32_t>(rec.size()));
    w.Bytes(rec);
  }
  WriteFileBytes(path, w.bytes());
}

std::vector<PretrainExample> ReadShard(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  ByteReader r(bytes);
  for (char c : kShardMagic) {
    if (r.U8() != static_cast<std::uint8_t>(c)) throw Error(ErrorCode::kFormat, "not a shard file: " + path);
  }
  const std::uint8_t version = r.U8();
  if (version != kShardFormatVersion) {
    throw Error(ErrorCode::kFormat, "unsupported shard version " + std::to_string(version));
  }
  const std::uint64_t n = r.U64();
  std::vector<PretrainExample> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.U32();
    out.push_back(DeserializeExample(r.Bytes(len)));
  }
  if (!r.done()) throw Error(ErrorCode::kFormat, "trailing bytes in shard: " + path);
  return out;
}

}  // namespace tpslu
