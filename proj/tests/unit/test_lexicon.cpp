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
#include <sstream>

#include "tpslu/error.hpp"
#include "tpslu/lexicon.hpp"

using namespace tpslu;

namespace {

// Entries copied from cmudict 0.7b (cmudict-1.1.3 distribution).
constexpr const char* kExcerpt =
    ";;; excerpt\n"
    "A  AH0\n"
    "A(2)  EY1\n"
    "HELLO  HH AH0 L OW1\n"
    "LIGHT  L AY1 T\n"
    "LIGHTS  L AY1 T S\n"
    "OFF  AO1 F\n"
    "PLAY  P L EY1\n"
    "SONG  S AO1 NG\n"
    "THE  DH AH0\n"
    "TURN  T ER1 N\n";

Lexicon Excerpt() {
  std::istringstream in(kExcerpt);
  return Lexicon::Parse(in);
}

std::vector<std::string> Sym(const Lexicon& lex, const std::string& w) { return lex.LookupSymbols(w); }

}  // namespace

TEST_CASE("dictionary entries lose stress digits and keep the first pronunciation") {
  const Lexicon lex = Excerpt();
  CHECK(lex.size() == 9);
  CHECK(Sym(lex, "hello") == std::vector<std::string>{"HH", "AH", "L", "OW"});
  CHECK(Sym(lex, "a") == std::vector<std::string>{"AH"});
  CHECK(Sym(lex, "play") == std::vector<std::string>{"P", "L", "EY"});
}

TEST_CASE("lookup is case-insensitive and falls back to <UNK>") {
  const Lexicon lex = Excerpt();
  CHECK(lex.Lookup("HELLO") == lex.Lookup("hello"));
  CHECK(lex.Lookup("Hello") == lex.Lookup("hello"));
  CHECK(Sym(lex, "zzqxv") == std::vector<std::string>{"<UNK>"});
  CHECK(lex.Lookup("zzqxv") == std::vector<PhoneId>{PhoneVocab::kUnk});
  CHECK_FALSE(lex.Contains("zzqxv"));
  CHECK(lex.Contains("SONG"));
}

TEST_CASE("phone vocabulary is reserved symbols then sorted base phones") {
  const Lexicon lex = Excerpt();
  const auto& pv = lex.phone_vocab();
  REQUIRE(pv.size() >= 3);
  CHECK(pv.Symbol(0) == "[PAD]");
  CHECK(pv.Symbol(1) == "[MASK]");
  CHECK(pv.Symbol(2) == "<UNK>");
  std::vector<std::string> base(pv.symbols().begin() + 3, pv.symbols().end());
  CHECK(std::is_sorted(base.begin(), base.end()));
  CHECK(std::adjacent_find(base.begin(), base.end()) == base.end());
  CHECK(base == std::vector<std::string>{"AH", "AO", "AY", "DH", "ER", "EY", "F", "HH", "L", "N", "NG", "OW",
                                         "P", "S", "T"});
  for (PhoneId i = 0; i < pv.size(); ++i) CHECK(pv.Id(pv.Symbol(i)) == i);
}

TEST_CASE("parse errors") {
  SUBCASE("comment only") {
    std::istringstream in(";;; comment\n");
    try {
      Lexicon::Parse(in);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
    }
  }
  SUBCASE("entry without phones names the line") {
    std::istringstream in("A  AH0\nBROKEN\n");
    try {
      Lexicon::Parse(in);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
  }
}

TEST_CASE("unknown-word rate over a corpus") {
  const Lexicon lex = Excerpt();
  std::istringstream corpus("play the song\nplay zzz\n");
  const UnkStats s = lex.MeasureUnkRate(corpus);
  CHECK(s.total_tokens == 5);
  CHECK(s.unk_tokens == 1);
  CHECK(s.unk_rate() == doctest::Approx(0.2));
}

TEST_CASE("phone vocabulary save/load round trip") {
  const Lexicon lex = Excerpt();
  const auto path = (std::filesystem::temp_directory_path() / "tpslu_phones_test.txt").string();
  lex.phone_vocab().Save(path);
  CHECK(PhoneVocab::Load(path) == lex.phone_vocab());
  std::filesystem::remove(path);
}

TEST_CASE("whitespace helpers") {
  CHECK(SplitWhitespace("  a\tb  c\n") == std::vector<std::string>{"a", "b", "c"});
  CHECK(SplitWhitespace("   ").empty());
  CHECK(ToLower("HeLLo") == "hello");
}
