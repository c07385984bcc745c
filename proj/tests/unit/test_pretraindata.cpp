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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "support/synth.hpp"
#include "tpslu/bytes.hpp"
#include "tpslu/error.hpp"
#include "tpslu/pretraindata.hpp"

using namespace tpslu;

namespace {

struct Fixture {
  testing::SynthWorld world = testing::MakeSynthWorld();
  Lexicon lex = world.MakeLexicon();
  Vocab vocab = world.MakeVocab();
  JointIndex joint{vocab, lex.phone_vocab()};
  std::vector<PairedUtterance> corpus;

  Fixture() {
    for (const auto& line : world.corpus) corpus.push_back(BuildPaired(lex, vocab, line));
  }
  PairedUtterance Words(int m) const {
    std::string line;
    for (int i = 0; i < m; ++i) line += vocab.Token(Vocab::kNumSpecial + i) + " ";
    return BuildPaired(lex, vocab, line);
  }
};

const Fixture& F() {
  static const Fixture f;
  return f;
}

std::set<std::int32_t> Keys(const std::map<std::int32_t, TokenId>& m) {
  std::set<std::int32_t> k;
  for (const auto& [p, id] : m) k.insert(p);
  return k;
}

}  // namespace

TEST_CASE("mask_words edge percentages") {
  const auto& f = F();
  const auto u = f.Words(2);
  CounterRng rng(1);
  auto r = MaskWords(u, 100, {}, f.joint, rng);
  CHECK(r.selected_words == std::vector<std::int32_t>{0, 1});
  CHECK(r.targets.size() == u.subtokens.size());
  r = MaskWords(u, 0, {}, f.joint, rng);
  CHECK(r.targets.empty());
  CHECK(r.ids == u.subtokens);
}

TEST_CASE("seeded replay selects the same words") {
  const auto& f = F();
  const auto u = f.Words(4);
  CounterRng a(7), b(7);
  const auto ra = MaskWords(u, 50, {}, f.joint, a);
  const auto rb = MaskWords(u, 50, {}, f.joint, b);
  CHECK(ra.selected_words.size() == 2);
  CHECK(ra.selected_words == rb.selected_words);
  CHECK(ra.ids == rb.ids);
}

TEST_CASE("mask_phones covers whole phone spans") {
  const auto& f = F();
  const auto u = f.Words(3);
  CounterRng rng(2);
  auto r = MaskPhones(u, 100, {}, f.joint, rng);
  CHECK(r.targets.size() == u.phones.size());
  const auto one = f.Words(1);
  r = MaskPhones(one, 50, {}, f.joint, rng);
  CHECK(r.selected_words == std::vector<std::int32_t>{0});
  CHECK(r.targets.size() == one.phones.size());
  for (int seed = 0; seed < 50; ++seed) {
    CounterRng g(static_cast<std::uint64_t>(seed));
    const auto m = MaskPhones(u, 34, {}, f.joint, g);
    std::set<std::int32_t> want;
    for (auto w : m.selected_words) {
      for (auto p = u.word_phone_spans[static_cast<std::size_t>(w)].begin;
           p < u.word_phone_spans[static_cast<std::size_t>(w)].end; ++p) {
        want.insert(p);
      }
    }
    CHECK(Keys(m.targets) == want);
  }
}

TEST_CASE("substitution actions apply to the whole word") {
  const auto& f = F();
  const auto u = f.Words(6);
  SubstitutionSplit all_random{0, 1, 0};
  for (int seed = 0; seed < 100; ++seed) {
    CounterRng g(static_cast<std::uint64_t>(seed));
    const auto w = MaskWords(u, 50, all_random, f.joint, g);
    for (const auto& [pos, orig] : w.targets) {
      const TokenId now = w.ids[static_cast<std::size_t>(pos)];
      CHECK(now >= Vocab::kNumSpecial);
      CHECK(f.joint.IsWord(now));
      CHECK(orig == u.subtokens[static_cast<std::size_t>(pos)]);
    }
    const auto p = MaskPhones(u, 50, all_random, f.joint, g);
    for (const auto& [pos, orig] : p.targets) {
      const TokenId now = p.ids[static_cast<std::size_t>(pos)];
      CHECK(f.joint.IsPhone(now));
      CHECK(f.joint.ToPhone(now) >= PhoneVocab::kNumReserved);
    }
    const auto m = MaskWords(u, 50, {1, 0, 0}, f.joint, g);
    for (const auto& [pos, orig] : m.targets) CHECK(m.ids[static_cast<std::size_t>(pos)] == Vocab::kMask);
    const auto k = MaskWords(u, 50, {0, 0, 1}, f.joint, g);
    CHECK(k.ids == u.subtokens);
    CHECK_FALSE(k.targets.empty());
  }
}

TEST_CASE("stochastic rounding keeps the expected word count") {
  // 15% of 5 words = 0.75 words; the minimum-one rule lifts it to 1.
  CounterRng rng(3);
  for (int i = 0; i < 100; ++i) CHECK(NumWordsToMask(15, 5, rng) == 1);
  // 15% of 10 = 1.5: half 1, half 2.
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto k = NumWordsToMask(15, 10, rng);
    CHECK((k == 1 || k == 2));
    sum += k;
  }
  CHECK(sum / n == doctest::Approx(1.5).epsilon(0.02));
  CHECK(NumWordsToMask(30, 10, rng) == 3);
  CHECK(NumWordsToMask(0, 10, rng) == 0);
}

TEST_CASE("strategies and loss flags") {
  const auto& f = F();
  const auto& u = f.corpus[0];
  MaskingConfig one;
  one.strategy = MaskStrategy::kOneMod;
  one.word_mask_pct = 100;
  one.phone_mask_pct = 100;
  int text = 0, phone = 0;
  for (int s = 0; s < 200; ++s) {
    CounterRng rng(static_cast<std::uint64_t>(s));
    const auto ex = ApplyStrategy(u, one, f.joint, 64, rng);
    const bool w = !ex.encoded.mlm_targets.empty(), p = !ex.encoded.msm_targets.empty();
    CHECK(w != p);
    text += w;
    phone += p;
    CHECK(ex.loss_flags == (w ? kLossCondMlm : kLossCondMsm));
  }
  CHECK(text > 60);
  CHECK(phone > 60);

  MaskingConfig two = one;
  two.strategy = MaskStrategy::kTwoMod;
  two.word_mask_pct = two.phone_mask_pct = 30;
  CounterRng rng(9);
  auto ex = ApplyStrategy(u, two, f.joint, 64, rng);
  CHECK_FALSE(ex.encoded.mlm_targets.empty());
  CHECK_FALSE(ex.encoded.msm_targets.empty());
  CHECK(ex.loss_flags == (kLossCondMlm | kLossCondMsm));

  MaskingConfig text_only;
  ex = ApplyStrategy(u, text_only, f.joint, 64, rng);
  CHECK_FALSE(ex.encoded.mlm_targets.empty());
  CHECK(ex.encoded.msm_targets.empty());
  CHECK_FALSE(ex.encoded.has_phones());
  CHECK(ex.loss_flags == kLossMlm);
}

TEST_CASE("WSA pairs") {
  const auto& f = F();
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kTwoMod;
  cfg.word_mask_pct = cfg.phone_mask_pct = 30;
  cfg.wsa_enabled = true;
  cfg.seed = 4;
  int pos = 0, neg = 0, foreign = 0;
  const auto batch = BuildWsaBatch(f.corpus, cfg, f.joint, 64);
  REQUIRE(batch.size() == f.corpus.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    REQUIRE(ex.encoded.wsa_label.has_value());
    if (*ex.encoded.wsa_label == WsaLabel::kMatch) {
      ++pos;
      CHECK(ex.loss_flags == (kLossCondMlm | kLossCondMsm | kLossWsa));
    } else {
      ++neg;
      CHECK(ex.loss_flags == (kLossMlm | kLossMsm | kLossWsa));
      // Restoring the targets recovers a phone segment other than the utterance's own.
      std::vector<TokenId> seg, own;
      for (auto p = ex.encoded.phone_region.begin; p < ex.encoded.phone_region.end; ++p) {
        const auto t = ex.encoded.msm_targets.find(p);
        seg.push_back(t != ex.encoded.msm_targets.end() ? t->second : ex.encoded.input_ids[static_cast<std::size_t>(p)]);
      }
      for (auto ph : f.corpus[i].phones) own.push_back(f.joint.FromPhone(ph));
      foreign += seg != own;
    }
    CHECK(ex == MakePretrainExample(f.corpus, i, i, cfg, f.joint, 64));
  }
  CHECK(pos > 100);
  CHECK(neg > 100);
  CHECK(foreign == neg);

  std::vector<PairedUtterance> single = {f.corpus[0]};
  CHECK_THROWS_WITH_AS(BuildWsaBatch(single, cfg, f.joint, 64), "cannot sample mismatched phone sequence", Error);
}

TEST_CASE("config validation") {
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kOneMod;
  cfg.word_mask_pct = cfg.phone_mask_pct = 100;
  CHECK_NOTHROW(cfg.Validate());
  cfg.wsa_enabled = true;
  CHECK_THROWS_AS(cfg.Validate(), Error);
  MaskingConfig bad;
  bad.word_mask_pct = 120;
  CHECK_THROWS_AS(bad.Validate(), Error);
  bad = {};
  bad.split = {0.5, 0.1, 0.1};
  CHECK_THROWS_AS(bad.Validate(), Error);
  CHECK(ParseMaskStrategy(MaskStrategyName(MaskStrategy::kTwoMod)) == MaskStrategy::kTwoMod);
  CHECK_THROWS_AS(ParseMaskStrategy("threeMod"), Error);
}

TEST_CASE("property: determinism and atomicity over all strategies") {
  const auto& f = F();
  for (auto strategy : {MaskStrategy::kOneMod, MaskStrategy::kTwoMod, MaskStrategy::kTextOnly}) {
    MaskingConfig cfg;
    cfg.strategy = strategy;
    cfg.word_mask_pct = 40;
    cfg.phone_mask_pct = strategy == MaskStrategy::kTextOnly ? 0 : 40;
    cfg.wsa_enabled = true;
    cfg.seed = 12;
    for (std::size_t i = 0; i < f.corpus.size(); ++i) {
      const auto ex = MakePretrainExample(f.corpus, i, i + 1000, cfg, f.joint, 64);
      CHECK(ex == MakePretrainExample(f.corpus, i, i + 1000, cfg, f.joint, 64));
      const auto mk = Keys(ex.encoded.mlm_targets), pk = Keys(ex.encoded.msm_targets);
      for (const auto& s : ex.encoded.word_spans) {
        int hit = 0;
        for (auto p = s.begin; p < s.end; ++p) hit += mk.count(p);
        CHECK((hit == 0 || hit == s.size()));
      }
      for (const auto& s : ex.encoded.phone_word_spans) {
        int hit = 0;
        for (auto p = s.begin; p < s.end; ++p) hit += pk.count(p);
        CHECK((hit == 0 || hit == s.size()));
      }
      for (auto p : mk) CHECK(ex.encoded.word_region.contains(p));
      for (auto p : pk) CHECK(ex.encoded.phone_region.contains(p));
    }
  }
}

TEST_CASE("shard round trip and corruption") {
  const auto& f = F();
  MaskingConfig cfg;
  cfg.strategy = MaskStrategy::kTwoMod;
  cfg.phone_mask_pct = 20;
  cfg.wsa_enabled = true;
  const auto batch = BuildWsaBatch(f.corpus, cfg, f.joint, 64);
  const auto path = (std::filesystem::temp_directory_path() / "tpslu_shard_test.bin").string();
  WriteShard(path, batch);
  CHECK(ReadShard(path) == batch);

  auto bytes = ReadFileBytes(path);
  CHECK(bytes[4] == kShardFormatVersion);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  WriteFileBytes(path, truncated);
  CHECK_THROWS_AS(ReadShard(path), Error);
  bytes[0] = 'X';
  WriteFileBytes(path, bytes);
  CHECK_THROWS_AS(ReadShard(path), Error);
  std::filesystem::remove(path);

  for (const auto& ex : batch) CHECK(DeserializeExample(SerializeExample(ex)) == ex);
}
