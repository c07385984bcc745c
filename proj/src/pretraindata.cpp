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

#include "tpslu/pretraindata.hpp"

#include <algorithm>
#include <cmath>

#include "tpslu/error.hpp"

namespace tpslu {

const char* MaskStrategyName(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::kOneMod: return "oneMod";
    case MaskStrategy::kTwoMod: return "twoMod";
    case MaskStrategy::kTextOnly: return "textOnly";
  }
  return "?";
}

MaskStrategy ParseMaskStrategy(const std::string& name) {
  if (name == "oneMod") return MaskStrategy::kOneMod;
  if (name == "twoMod") return MaskStrategy::kTwoMod;
  if (name == "textOnly") return MaskStrategy::kTextOnly;
  throw Error(ErrorCode::kConfig, "unknown masking strategy: " + name);
}

void MaskingConfig::Validate() const {
  auto pct_ok = [](double v) { return v >= 0.0 && v <= 100.0; };
  if (!pct_ok(word_mask_pct) || !pct_ok(phone_mask_pct) || !pct_ok(mlm_mix_pct)) {
    throw Error(ErrorCode::kConfig, "masking percentages must lie in [0, 100]");
  }
  if (split.mask < 0 || split.random < 0 || split.keep < 0 ||
      std::abs(split.mask + split.random + split.keep - 1.0) > 1e-9) {
    throw Error(ErrorCode::kConfig, "substitution split must be non-negative and sum to 1");
  }
  if (wsa_negative_rate < 0.0 || wsa_negative_rate > 1.0) {
    throw Error(ErrorCode::kConfig, "wsa_negative_rate must lie in [0, 1]");
  }
  if (strategy == MaskStrategy::kOneMod && word_mask_pct == 100.0 && phone_mask_pct == 100.0 &&
      wsa_enabled) {
    throw Error(ErrorCode::kConfig,
                "WSA cannot be combined with oneMod 100%/100% masking: every sample has one "
                "modality fully masked");
  }
}

std::string LossFlagsToString(LossFlags flags) {
  static const std::pair<LossFlag, const char*> kNames[] = {
      {kLossCondMlm, "condMLM"}, {kLossCondMsm, "condMSM"}, {kLossMlm, "MLM"},
      {kLossMsm, "MSM"},         {kLossWsa, "WSA"}};
  std::string out;
  for (const auto& [flag, name] : kNames) {
    if (flags & flag) {
      if (!out.empty()) out += ",";
      out += name;
    }
  }
  return out;
}

std::int32_t NumWordsToMask(double pct, std::int32_t num_words, CounterRng& rng) {
  if (pct <= 0.0 || num_words <= 0) return 0;
  const double expected = pct / 100.0 * num_words;
  auto k = static_cast<std::int32_t>(std::floor(expected));
  const double frac = expected - k;
  if (frac > 0.0 && rng.Bernoulli(frac)) ++k;
  return std::clamp(k, 1, num_words);
}

namespace {

std::vector<std::int32_t> SampleWords(std::int32_t m, std::int32_t k, CounterRng& rng) {
  std::vector<std::int32_t> idx(static_cast<std::size_t>(m));
  for (std::int32_t i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (std::int32_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::int32_t>(rng.UniformInt(static_cast<std::uint64_t>(m - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

SubstitutionAction DrawAction(const SubstitutionSplit& split, CounterRng& rng) {
  const double u = rng.Uniform();
  if (u < split.mask) return SubstitutionAction::kMask;
  if (u < split.mask + split.random) return SubstitutionAction::kRandom;
  return SubstitutionAction::kKeep;
}

// Shared by both modalities: `ids` are joint ids, `spans` index into them.
MaskResult MaskSpans(std::vector<TokenId> ids, const std::vector<Span>& spans, double pct,
                     const SubstitutionSplit& split, TokenId mask_id, TokenId random_lo,
                     TokenId random_hi, CounterRng& rng) {
  MaskResult r;
  const auto m = static_cast<std::int32_t>(spans.size());
  const std::int32_t k = NumWordsToMask(pct, m, rng);
  r.selected_words = SampleWords(m, k, rng);
  for (std::int32_t w : r.selected_words) {
    const SubstitutionAction action = DrawAction(split, rng);
    r.actions.push_back(action);
    const Span& s = spans[static_cast<std::size_t>(w)];
    for (std::int32_t i = s.begin; i < s.end; ++i) {
      auto& id = ids[static_cast<std::size_t>(i)];
      r.targets.emplace(i, id);
      if (action == SubstitutionAction::kMask) {
        id = mask_id;
      } else if (action == SubstitutionAction::kRandom && random_hi > random_lo) {
        id = random_lo + static_cast<TokenId>(
                             rng.UniformInt(static_cast<std::uint64_t>(random_hi - random_lo)));
      }
    }
  }
  r.ids = std::move(ids);
  return r;
}

PairedUtterance Prefix(const PairedUtterance& u, std::int32_t nw) {
  if (nw >= u.num_words()) return u;
  PairedUtterance p;
  const auto n = static_cast<std::size_t>(nw);
  p.words.assign(u.words.begin(), u.words.begin() + nw);
  p.word_subtoken_spans.assign(u.word_subtoken_spans.begin(), u.word_subtoken_spans.begin() + nw);
  p.word_phone_spans.assign(u.word_phone_spans.begin(), u.word_phone_spans.begin() + nw);
  const auto ns = nw == 0 ? 0 : p.word_subtoken_spans[n - 1].end;
  const auto np = nw == 0 ? 0 : p.word_phone_spans[n - 1].end;
  p.subtokens.assign(u.subtokens.begin(), u.subtokens.begin() + ns);
  p.phones.assign(u.phones.begin(), u.phones.begin() + np);
  return p;
}

enum class Branch { kWords, kPhones, kBoth, kPlainMlm, kNone };

Branch ChooseBranch(const MaskingConfig& cfg, CounterRng& rng) {
  switch (cfg.strategy) {
    case MaskStrategy::kTextOnly: return Branch::kPlainMlm;
    case MaskStrategy::kTwoMod: return Branch::kBoth;
    case MaskStrategy::kOneMod: {
      std::vector<Branch> options;
      if (cfg.word_mask_pct > 0) options.push_back(Branch::kWords);
      if (cfg.phone_mask_pct > 0) options.push_back(Branch::kPhones);
      if (cfg.mlm_mix_pct > 0) options.push_back(Branch::kPlainMlm);
      if (options.empty()) return Branch::kNone;
      return options[rng.UniformInt(options.size())];
    }
  }
  return Branch::kNone;
}

}  // namespace

MaskResult MaskWords(const PairedUtterance& u, double pct, const SubstitutionSplit& split,
                     const JointIndex& joint, CounterRng& rng) {
  if (u.num_words() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot mask an empty utterance");
  return MaskSpans(u.subtokens, u.word_subtoken_spans, pct, split, Vocab::kMask,
                   Vocab::kNumSpecial, joint.word_vocab_size, rng);
}

MaskResult MaskPhones(const PairedUtterance& u, double pct, const SubstitutionSplit& split,
                      const JointIndex& joint, CounterRng& rng) {
  if (u.num_words() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot mask an empty utterance");
  std::vector<TokenId> ids;
  ids.reserve(u.phones.size());
  for (PhoneId p : u.phones) ids.push_back(joint.FromPhone(p));
  return MaskSpans(std::move(ids), u.word_phone_spans, pct, split,
                   joint.FromPhone(PhoneVocab::kMask), joint.FromPhone(PhoneVocab::kNumReserved),
                   joint.total(), rng);
}

PretrainExample ApplyStrategy(const PairedUtterance& u, const MaskingConfig& cfg,
                              const JointIndex& joint, std::int32_t max_seq_len, CounterRng& rng) {
  return ApplyStrategy(u, nullptr, std::nullopt, cfg, joint, max_seq_len, rng);
}

PretrainExample ApplyStrategy(const PairedUtterance& u, const PairedUtterance* phones_from,
                              std::optional<WsaLabel> wsa_label, const MaskingConfig& cfg,
                              const JointIndex& joint, std::int32_t max_seq_len, CounterRng& rng) {
  cfg.Validate();
  const Branch branch = ChooseBranch(cfg, rng);
  const bool with_phones = branch != Branch::kPlainMlm || wsa_label.has_value();
  const PairedUtterance& donor = phones_from ? *phones_from : u;
  const bool mismatched = wsa_label == WsaLabel::kMismatch;

  PretrainExample out;
  EncodedExample& ex = out.encoded;
  ex = with_phones ? EncodePair(u, donor, joint, max_seq_len) : EncodeText(u, max_seq_len);
  ex.wsa_label = wsa_label;
  const PairedUtterance words = Prefix(u, static_cast<std::int32_t>(ex.word_spans.size()));

  double word_pct = 0.0;
  double phone_pct = 0.0;
  switch (branch) {
    case Branch::kWords: word_pct = cfg.word_mask_pct; break;
    case Branch::kPhones: phone_pct = cfg.phone_mask_pct; break;
    case Branch::kBoth:
      word_pct = cfg.word_mask_pct;
      phone_pct = cfg.phone_mask_pct;
      break;
    case Branch::kPlainMlm:
      word_pct = cfg.strategy == MaskStrategy::kTextOnly ? cfg.word_mask_pct : cfg.mlm_mix_pct;
      break;
    case Branch::kNone: break;
  }

  if (word_pct > 0) {
    MaskResult r = MaskWords(words, word_pct, cfg.split, joint, rng);
    const std::int32_t base = ex.word_region.begin;
    for (std::size_t i = 0; i < r.ids.size(); ++i) ex.input_ids[base + i] = r.ids[i];
    for (const auto& [i, id] : r.targets) ex.mlm_targets.emplace(base + i, id);
  }
  if (phone_pct > 0 && with_phones) {
    const PairedUtterance phones =
        Prefix(donor, static_cast<std::int32_t>(ex.phone_word_spans.size()));
    MaskResult r = MaskPhones(phones, phone_pct, cfg.split, joint, rng);
    const std::int32_t base = ex.phone_region.begin;
    for (std::size_t i = 0; i < r.ids.size(); ++i) ex.input_ids[base + i] = r.ids[i];
    for (const auto& [i, id] : r.targets) ex.msm_targets.emplace(base + i, id);
  }

  if (!ex.mlm_targets.empty()) {
    out.loss_flags |= (with_phones && !mismatched) ? kLossCondMlm : kLossMlm;
  }
  if (!ex.msm_targets.empty()) out.loss_flags |= mismatched ? kLossMsm : kLossCondMsm;
  if (wsa_label) out.loss_flags |= kLossWsa;
  return out;
}

PretrainExample MakePretrainExample(std::span<const PairedUtterance> corpus, std::size_t index,
                                    std::uint64_t stream_index, const MaskingConfig& cfg,
                                    const JointIndex& joint, std::int32_t max_seq_len) {
  if (index >= corpus.size()) throw Error(ErrorCode::kInvalidArgument, "utterance index out of range");
  CounterRng rng(cfg.seed, stream_index);
  const PairedUtterance& u = corpus[index];
  if (!cfg.wsa_enabled) return ApplyStrategy(u, nullptr, std::nullopt, cfg, joint, max_seq_len, rng);

  if (!rng.Bernoulli(cfg.wsa_negative_rate)) {
    return ApplyStrategy(u, &u, WsaLabel::kMatch, cfg, joint, max_seq_len, rng);
  }
  if (corpus.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "cannot sample mismatched phone sequence");
  }
  // Donor W' must differ from W; retry on duplicate sentences, then scan.
  const std::size_t n = corpus.size();
  std::size_t donor = n;
  for (int attempt = 0; attempt < 32 && donor == n; ++attempt) {
    std::size_t j = static_cast<std::size_t>(rng.UniformInt(n - 1));
    if (j >= index) ++j;
    if (corpus[j].words != u.words) donor = j;
  }
  for (std::size_t step = 1; step < n && donor == n; ++step) {
    const std::size_t j = (index + step) % n;
    if (corpus[j].words != u.words) donor = j;
  }
  if (donor == n) throw Error(ErrorCode::kInvalidArgument, "cannot sample mismatched phone sequence");
  return ApplyStrategy(u, &corpus[donor], WsaLabel::kMismatch, cfg, joint, max_seq_len, rng);
}

std::vector<PretrainExample> BuildWsaBatch(std::span<const PairedUtterance> corpus,
                                           const MaskingConfig& cfg, const JointIndex& joint,
                                           std::int32_t max_seq_len, std::uint64_t first_stream) {
  cfg.Validate();
  if (cfg.wsa_enabled && cfg.wsa_negative_rate > 0 && corpus.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "cannot sample mismatched phone sequence");
  }
  std::vector<PretrainExample> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.push_back(MakePretrainExample(corpus, i, first_stream + i, cfg, joint, max_seq_len));
  }
  return out;
}

}  // namespace tpslu
