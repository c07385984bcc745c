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

#ifndef TPSLU_LEXICON_HPP_
#define TPSLU_LEXICON_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tpslu {

using PhoneId = std::int32_t;

// Phone-label inventory. Reserved symbols occupy the first ids; the rest are
// stress-free ARPABET base phones in sorted order.
class PhoneVocab {
 public:
  static constexpr PhoneId kPad = 0;
  static constexpr PhoneId kMask = 1;
  static constexpr PhoneId kUnk = 2;
  static constexpr PhoneId kNumReserved = 3;
  static constexpr const char* kPadSymbol = "[PAD]";
  static constexpr const char* kMaskSymbol = "[MASK]";
  static constexpr const char* kUnkSymbol = "<UNK>";

  PhoneVocab();
  // `base_phones` need not be sorted or unique.
  static PhoneVocab FromBasePhones(std::vector<std::string> base_phones);
  // One symbol per line, line number = id.
  static PhoneVocab Load(const std::string& path);
  void Save(const std::string& path) const;

  PhoneId Id(std::string_view symbol) const;  // throws if absent
  bool Contains(std::string_view symbol) const;
  const std::string& Symbol(PhoneId id) const;
  std::int32_t size() const { return static_cast<std::int32_t>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  bool operator==(const PhoneVocab& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, PhoneId> index_;
};

struct UnkStats {
  std::int64_t total_tokens = 0;
  std::int64_t unk_tokens = 0;
  double unk_rate() const {
    return total_tokens == 0 ? 0.0 : static_cast<double>(unk_tokens) / total_tokens;
  }
};

class Lexicon {
 public:
  // CMU dictionary format. Comment lines start with ";;;", entries are
  // `WORD  P1 P2 ...`, alternates `WORD(n)` are skipped, and only the first
  // pronunciation of a word is kept. Stress digits are stripped.
  static Lexicon Parse(std::istream& source);
  static Lexicon Load(const std::string& path);

  // Case-insensitive. Unknown words resolve to the single phone <UNK>.
  std::vector<PhoneId> Lookup(std::string_view word) const;
  std::vector<std::string> LookupSymbols(std::string_view word) const;
  bool Contains(std::string_view word) const;

  const PhoneVocab& phone_vocab() const { return phone_vocab_; }
  std::size_t size() const { return entries_.size(); }
  const std::unordered_map<std::string, std::vector<PhoneId>>& entries() const {
    return entries_;
  }

  // Counts whitespace-separated word tokens of `corpus` resolved to <UNK>.
  UnkStats MeasureUnkRate(std::istream& corpus) const;

 private:
  std::unordered_map<std::string, std::vector<PhoneId>> entries_;
  PhoneVocab phone_vocab_;
};

std::string ToLower(std::string_view s);
std::vector<std::string> SplitWhitespace(std::string_view s);

}  // namespace tpslu

#endif  // TPSLU_LEXICON_HPP_
