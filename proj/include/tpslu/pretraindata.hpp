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

#ifndef TPSLU_PRETRAINDATA_HPP_
#define TPSLU_PRETRAINDATA_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tpslu/rng.hpp"
#include "tpslu/textproc.hpp"

namespace tpslu {

enum class MaskStrategy { kOneMod, kTwoMod, kTextOnly };

const char* MaskStrategyName(MaskStrategy s);
MaskStrategy ParseMaskStrategy(const std::string& name);

struct SubstitutionSplit {
  double mask = 0.8;
  double random = 0.1;
  double keep = 0.1;
  bool operator==(const SubstitutionSplit&) const = default;
};

struct MaskingConfig {
  double word_mask_pct = 15.0;   // M
  double phone_mask_pct = 0.0;   // N
  // Plain text-only MLM offered as an extra oneMod branch (0 disables). This
  // expresses mixtures such as "condMLM 100% + MLM 15% (oneMod)".
  double mlm_mix_pct = 0.0;
  MaskStrategy strategy = MaskStrategy::kTextOnly;
  SubstitutionSplit split;
  bool wsa_enabled = false;
  double wsa_negative_rate = 0.5;
  std::uint64_t seed = 0;

  // Throws kConfig on out-of-range values or the oneMod 100/100 + WSA
  // combination, where no sample keeps both sequences visible.
  void Validate() const;
  bool operator==(const MaskingConfig&) const = default;
};

enum LossFlag : std::uint8_t {
  kLossCondMlm = 1 << 0,
  kLossCondMsm = 1 << 1,
  kLossMlm = 1 << 2,
  kLossMsm = 1 << 3,
  kLossWsa = 1 << 4,
};
using LossFlags = std::uint8_t;

std::string LossFlagsToString(LossFlags flags);

struct PretrainExample {
  EncodedExample encoded;
  LossFlags loss_flags = 0;
  bool operator==(const PretrainExample&) const = default;
};

enum class SubstitutionAction : std::uint8_t { kMask, kRandom, kKeep };

// Masking outcome over one modality, indexed locally (subtoken index for
// words, phone index for phones). Ids are joint ids.
struct MaskResult {
  std::vector<TokenId> ids;
  std::map<std::int32_t, TokenId> targets;
  std::vector<std::int32_t> selected_words;
  std::vector<SubstitutionAction> actions;  // parallel to selected_words
};

// Number of words to mask: pct% of m, stochastically rounded so the expected
// count is exact, and at least one word when pct > 0.
std::int32_t NumWordsToMask(double pct, std::int32_t num_words, CounterRng& rng);

MaskResult MaskWords(const PairedUtterance& u, double pct, const SubstitutionSplit& split,
                     const JointIndex& joint, CounterRng& rng);
MaskResult MaskPhones(const PairedUtterance& u, double pct, const SubstitutionSplit& split,
                      const JointIndex& joint, CounterRng& rng);
inline MaskResult MaskWords(const PairedUtterance& u, const MaskingConfig& cfg,
                            const JointIndex& joint, CounterRng& rng) {
  return MaskWords(u, cfg.word_mask_pct, cfg.split, joint, rng);
}
inline MaskResult MaskPhones(const PairedUtterance& u, const MaskingConfig& cfg,
                             const JointIndex& joint, CounterRng& rng) {
  return MaskPhones(u, cfg.phone_mask_pct, cfg.split, joint, rng);
}

// Masks `u` per the configured strategy. With `phones_from` distinct from
// `u`, the phone segment comes from that donor and the losses are the
// unconditional MLM/MSM variants.
PretrainExample ApplyStrategy(const PairedUtterance& u, const MaskingConfig& cfg,
                              const JointIndex& joint, std::int32_t max_seq_len, CounterRng& rng);
PretrainExample ApplyStrategy(const PairedUtterance& u, const PairedUtterance* phones_from,
                              std::optional<WsaLabel> wsa_label, const MaskingConfig& cfg,
                              const JointIndex& joint, std::int32_t max_seq_len, CounterRng& rng);

// One example for corpus[index], drawing from the stream keyed by
// (cfg.seed, stream_index). Includes WSA pairing when enabled.
PretrainExample MakePretrainExample(std::span<const PairedUtterance> corpus, std::size_t index,
                                    std::uint64_t stream_index, const MaskingConfig& cfg,
                                    const JointIndex& joint, std::int32_t max_seq_len);

// One example per utterance, stream index = first_stream + position.
std::vector<PretrainExample> BuildWsaBatch(std::span<const PairedUtterance> corpus,
                                           const MaskingConfig& cfg, const JointIndex& joint,
                                           std::int32_t max_seq_len,
                                           std::uint64_t first_stream = 0);

// Binary shard: "TPSH" magic, format version byte, u64 record count, then
// u32-length-prefixed little-endian records.
inline constexpr std::uint8_t kShardFormatVersion = 1;
void WriteShard(const std::string& path, std::span<const PretrainExample> examples);
std::vector<PretrainExample> ReadShard(const std::string& path);
std::vector<std::uint8_t> SerializeExample(const PretrainExample& ex);
PretrainExample DeserializeExample(std::span<const std::uint8_t> bytes);

}  // namespace tpslu

#endif  // TPSLU_PRETRAINDATA_HPP_
