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

#include "tpslu/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>

#include "tpslu/error.hpp"

namespace tpslu {

std::string ToLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> SplitWhitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

PhoneVocab::PhoneVocab() : symbols_{kPadSymbol, kMaskSymbol, kUnkSymbol} {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    index_.emplace(symbols_[i], static_cast<PhoneId>(i));
  }
}

PhoneVocab PhoneVocab::FromBasePhones(std::vector<std::string> base_phones) {
  std::sort(base_phones.begin(), base_phones.end());
  base_phones.erase(std::unique(base_phones.begin(), base_phones.end()), base_phones.end());
  PhoneVocab vocab;
  for (auto& p : base_phones) {
    if (vocab.index_.count(p)) continue;
    vocab.index_.emplace(p, static_cast<PhoneId>(vocab.symbols_.size()));
    vocab.symbols_.push_back(std::move(p));
  }
  return vocab;
}

PhoneVocab PhoneVocab::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open phone vocabulary: " + path);
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    symbols.push_back(line);
  }
  if (symbols.size() < kNumReserved || symbols[kPad] != kPadSymbol ||
      symbols[kMask] != kMaskSymbol || symbols[kUnk] != kUnkSymbol) {
    throw Error(ErrorCode::kFormat, "phone vocabulary must start with [PAD], [MASK], <UNK>: " + path);
  }
  PhoneVocab vocab = FromBasePhones({symbols.begin() + kNumReserved, symbols.end()});
  if (vocab.symbols_ != symbols) {
    throw Error(ErrorCode::kFormat, "phone vocabulary is not sorted and unique: " + path);
  }
  return vocab;
}

void PhoneVocab::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write phone vocabulary: " + path);
  for (const auto& s : symbols_) out << s << '\n';
}

PhoneId PhoneVocab::Id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown phone symbol: " + std::string(symbol));
  }
  return it->second;
}

bool PhoneVocab::Contains(std::string_view symbol) const {
  return index_.count(std::string(symbol)) > 0;
}

const std::string& PhoneVocab::Symbol(PhoneId id) const {
  if (id < 0 || id >= size()) {
    throw Error(ErrorCode::kInvalidArgument, "phone id out of range: " + std::to_string(id));
  }
  return symbols_[static_cast<std::size_t>(id)];
}

namespace {

bool IsAlternate(std::string_view word) {
  // WORD(2), WORD(3), ...
  if (word.size() < 4 || word.back() != ')') return false;
  auto open = word.rfind('(');
  if (open == std::string_view::npos || open == 0 || open + 2 > word.size() - 1) return false;
  for (std::size_t i = open + 1; i + 1 < word.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(word[i]))) return false;
  }
  return true;
}

std::string StripStress(std::string_view phone) {
  std::size_t end = phone.size();
  while (end > 0 && std::isdigit(static_cast<unsigned char>(phone[end - 1]))) --end;
  return std::string(phone.substr(0, end));
}

}  // namespace

Lexicon Lexicon::Parse(std::istream& source) {
  std::vector<std::pair<std::string, std::vector<std::string>>> raw;
  std::set<std::string> seen;
  std::set<std::string> base_phones;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(";;;", 0) == 0) continue;
    auto fields = SplitWhitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line_no) + ": entry has no phones: " + line);
    }
    if (IsAlternate(fields[0])) continue;
    std::string word = ToLower(fields[0]);
    std::vector<std::string> phones;
    phones.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::string base = StripStress(fields[i]);
      if (base.empty()) {
        throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                           ": malformed phone '" + fields[i] + "'");
      }
      phones.push_back(std::move(base));
    }
    if (!seen.insert(word).second) continue;
    base_phones.insert(phones.begin(), phones.end());
    raw.emplace_back(std::move(word), std::move(phones));
  }
  if (raw.empty()) throw Error(ErrorCode::kParse, "empty lexicon: no dictionary entries found");

  Lexicon lex;
  lex.phone_vocab_ = PhoneVocab::FromBasePhones({base_phones.begin(), base_phones.end()});
  lex.entries_.reserve(raw.size());
  for (auto& [word, phones] : raw) {
    std::vector<PhoneId> ids;
    ids.reserve(phones.size());
    for (const auto& p : phones) ids.push_back(lex.phone_vocab_.Id(p));
    lex.entries_.emplace(std::move(word), std::move(ids));
  }
  return lex;
}

Lexicon Lexicon::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dictionary: " + path);
  return Parse(in);
}

std::vector<PhoneId> Lexicon::Lookup(std::string_view word) const {
  auto it = entries_.find(ToLower(word));
  if (it == entries_.end()) return {PhoneVocab::kUnk};
  return it->second;
}

std::vector<std::string> Lexicon::LookupSymbols(std::string_view word) const {
  std::vector<std::string> out;
  for (PhoneId id : Lookup(word)) out.push_back(phone_vocab_.Symbol(id));
  return out;
}

bool Lexicon::Contains(std::string_view word) const {
  return entries_.count(ToLower(word)) > 0;
}

UnkStats Lexicon::MeasureUnkRate(std::istream& corpus) const {
  UnkStats stats;
  std::string line;
  while (std::getline(corpus, line)) {
    for (const auto& w : SplitWhitespace(line)) {
      ++stats.total_tokens;
      if (!Contains(w)) ++stats.unk_tokens;
    }
  }
  return stats;
}

}  // namespace tpslu
