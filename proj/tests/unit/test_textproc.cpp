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

#include <sstream>

#include "support/synth.hpp"
#include "tpslu/error.hpp"
#include "tpslu/rng.hpp"
#include "tpslu/textproc.hpp"

using namespace tpslu;

namespace {

Vocab SmallVocab() {
  return Vocab::FromTokens({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "play", "##ing", "song", "turn",
                            "the", "lights", "off", "hello", "s", "##o", "##ng"});
}

Lexicon SmallLexicon() {
  // cmudict 0.7b entries.
  std::istringstream in(
      "HELLO  HH AH0 L OW1\nLIGHTS  L AY1 T S\nOFF  AO1 F\nPLAY  P L EY1\nSONG  S AO1 NG\nTHE  DH AH0\n"
      "TURN  T ER1 N\n");
  return Lexicon::Parse(in);
}

std::vector<std::string> Pieces(const Vocab& v, const std::vector<TokenId>& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(v.Token(id));
  return out;
}

bool Tiles(const std::vector<Span>& spans, std::int32_t length) {
  std::int32_t at = 0;
  for (const auto& s : spans) {
    if (s.begin != at || s.empty()) return false;
    at = s.end;
  }
  return at == length;
}

}  // namespace

TEST_CASE("greedy longest-match WordPiece") {
  const Vocab v = SmallVocab();
  auto t = Tokenize(v, "playing");
  CHECK(Pieces(v, t.ids) == std::vector<std::string>{"play", "##ing"});
  CHECK(t.word_spans == std::vector<Span>{{0, 2}});

  t = Tokenize(v, "qqq");
  CHECK(t.ids == std::vector<TokenId>{Vocab::kUnk});
  CHECK(t.word_spans == std::vector<Span>{{0, 1}});

  t = Tokenize(v, "play song");
  CHECK(Pieces(v, t.ids) == std::vector<std::string>{"play", "song"});
  CHECK(t.word_spans == std::vector<Span>{{0, 1}, {1, 2}});

  // Longest match wins over a shorter decomposition.
  t = Tokenize(v, "SONG");
  CHECK(Pieces(v, t.ids) == std::vector<std::string>{"song"});

  CHECK(Tokenize(v, "").ids.empty());
}

TEST_CASE("vocabulary specials and whole-word ids") {
  const Vocab v = SmallVocab();
  CHECK(v.Id("[CLS]") == Vocab::kCls);
  CHECK(v.Id("[UNK]") == Vocab::kUnk);
  CHECK_FALSE(v.Find("nope").has_value());
  for (TokenId id : v.WordTokenIds()) {
    CHECK(id >= Vocab::kNumSpecial);
    CHECK(v.Token(id).rfind("##", 0) != 0);
  }
  CHECK_THROWS_AS(Vocab::FromTokens({"a", "b"}), Error);
}

TEST_CASE("paired utterances align words, subtokens and phones") {
  const Vocab v = SmallVocab();
  const Lexicon lex = SmallLexicon();
  const auto u = BuildPaired(lex, v, "play song");
  const auto& pv = lex.phone_vocab();
  std::vector<std::string> phones;
  for (auto p : u.phones) phones.push_back(pv.Symbol(p));
  CHECK(phones == std::vector<std::string>{"P", "L", "EY", "S", "AO", "NG"});
  CHECK(u.word_phone_spans == std::vector<Span>{{0, 3}, {3, 6}});

  const auto hello = BuildPaired(lex, v, "hello");
  CHECK(hello.num_words() == 1);
  CHECK(hello.word_phone_spans == std::vector<Span>{{0, 4}});

  const auto oov = BuildPaired(lex, v, "play zzqxv");
  CHECK(oov.word_phone_spans[1].size() == 1);
  CHECK(oov.phones[static_cast<std::size_t>(oov.word_phone_spans[1].begin)] == PhoneVocab::kUnk);
}

TEST_CASE("pair layout, segments and positions") {
  const Vocab v = SmallVocab();
  const Lexicon lex = SmallLexicon();
  const JointIndex joint(v, lex.phone_vocab());
  const auto u = BuildPaired(lex, v, "play");
  const auto e = EncodePair(u, joint, 32);
  const auto& pv = lex.phone_vocab();
  const std::vector<TokenId> want = {Vocab::kCls, v.Id("play"), Vocab::kSep, joint.FromPhone(pv.Id("P")),
                                     joint.FromPhone(pv.Id("L")), joint.FromPhone(pv.Id("EY")), Vocab::kSep};
  CHECK(e.input_ids == want);
  CHECK(e.segment_ids == std::vector<std::int32_t>{0, 0, 0, 1, 1, 1, 1});
  CHECK(e.position_ids == std::vector<std::int32_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(e.word_region == Span{1, 2});
  CHECK(e.phone_region == Span{3, 6});
  CHECK(e.word_spans == std::vector<Span>{{1, 2}});
  CHECK(e.phone_word_spans == std::vector<Span>{{3, 6}});
  CHECK(e.has_phones());
}

TEST_CASE("whole-word truncation drops a word with its phones") {
  const Vocab v = SmallVocab();
  const Lexicon lex = SmallLexicon();
  const JointIndex joint(v, lex.phone_vocab());
  const auto u = BuildPaired(lex, v, "play song");
  const auto e = EncodePair(u, joint, 7);
  CHECK(e.size() == 7);
  CHECK(e.word_spans.size() == 1);
  CHECK(e.phone_word_spans.size() == 1);
  CHECK(e.input_ids[1] == v.Id("play"));
  CHECK_THROWS_AS(EncodePair(u, joint, 5), Error);
}

TEST_CASE("text-only layout") {
  const Vocab v = SmallVocab();
  const Lexicon lex = SmallLexicon();
  const auto u = BuildPaired(lex, v, "turn the lights off");
  const auto e = EncodeText(u, 32);
  CHECK(e.input_ids.front() == Vocab::kCls);
  CHECK(e.input_ids.back() == Vocab::kSep);
  CHECK(e.size() == 6);
  CHECK_FALSE(e.has_phones());
  CHECK(std::all_of(e.segment_ids.begin(), e.segment_ids.end(), [](auto s) { return s == 0; }));
  CHECK(TextWordsThatFit(u, 4) == 2);
}

TEST_CASE("joint index keeps word and phone ranges disjoint") {
  const JointIndex j(30, 10);
  CHECK(j.total() == 40);
  for (PhoneId p = 0; p < 10; ++p) {
    CHECK(j.IsPhone(j.FromPhone(p)));
    CHECK_FALSE(j.IsWord(j.FromPhone(p)));
    CHECK(j.ToPhone(j.FromPhone(p)) == p);
  }
  CHECK(j.IsWord(29));
  CHECK_FALSE(j.IsPhone(40));
}

TEST_CASE("property: spans tile every synthetic utterance and encoding is deterministic") {
  const auto w = testing::MakeSynthWorld();
  const Lexicon lex = w.MakeLexicon();
  const Vocab v = w.MakeVocab();
  const JointIndex joint(v, lex.phone_vocab());
  for (const auto& line : w.corpus) {
    const auto u = BuildPaired(lex, v, line);
    CHECK(Tiles(u.word_subtoken_spans, static_cast<std::int32_t>(u.subtokens.size())));
    CHECK(Tiles(u.word_phone_spans, static_cast<std::int32_t>(u.phones.size())));
    CHECK(u.word_subtoken_spans.size() == u.words.size());
    const auto a = EncodePair(u, joint, 64);
    CHECK(a == EncodePair(u, joint, 64));
    for (std::int32_t t = 0; t < a.size(); ++t) {
      const bool phone_seg = a.segment_ids[static_cast<std::size_t>(t)] == 1;
      if (a.phone_region.contains(t)) CHECK(joint.IsPhone(a.input_ids[static_cast<std::size_t>(t)]));
      if (a.word_region.contains(t)) CHECK(joint.IsWord(a.input_ids[static_cast<std::size_t>(t)]));
      CHECK(phone_seg == (t > a.word_region.end));
    }
  }
}
