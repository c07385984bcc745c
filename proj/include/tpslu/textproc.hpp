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

#ifndef TPSLU_TEXTPROC_HPP_
#define TPSLU_TEXTPROC_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tpslu/lexicon.hpp"

namespace tpslu {

using TokenId = std::int32_t;

// Half-open index range [begin, end).
struct Span {
  std::int32_t begin = 0;
  std::int32_t end = 0;
  std::int32_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(std::int32_t i) const { return i >= begin && i < end; }
  bool operator==(const Span&) const = default;
};

// Subword vocabulary. The five specials sit at ids 0-4; continuation pieces
// carry a "##" prefix.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr TokenId kNumSpecial = 5;

  static Vocab FromTokens(std::vector<std::string> tokens);
  // One token per line, line number = id.
  static Vocab Load(const std::string& path);
  void Save(const std::string& path) const;

  std::optional<TokenId> Find(std::string_view token) const;
  TokenId Id(std::string_view token) const;  // throws if absent
  const std::string& Token(TokenId id) const;
  std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Ids of whole-word tokens: not special and not a continuation piece.
  std::vector<TokenId> WordTokenIds() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct Tokenized {
  std::vector<TokenId> ids;
  std::vector<Span> word_spans;
};

// Greedy longest-match WordPiece over whitespace-split, lowercased words. A
// word with no complete decomposition becomes a single [UNK].
Tokenized Tokenize(const Vocab& vocab, std::string_view text);

// A sentence W with its phone sequence P and the per-word alignment of both.
struct PairedUtterance {
  std::vector<std::string> words;
  std::vector<TokenId> subtokens;
  std::vector<PhoneId> phones;
  std::vector<Span> word_subtoken_spans;
  std::vector<Span> word_phone_spans;

  std::int32_t num_words() const { return static_cast<std::int32_t>(words.size()); }
  bool operator==(const PairedUtterance&) const = default;
};

PairedUtterance BuildPaired(const Lexicon& lex, const Vocab& vocab, std::string_view text);

// Words and phones share one id space: word ids first, then phone ids offset
// by the word vocabulary size.
struct JointIndex {
  std::int32_t word_vocab_size = 0;
  std::int32_t phone_vocab_size = 0;

  JointIndex() = default;
  JointIndex(const Vocab& vocab, const PhoneVocab& phones)
      : word_vocab_size(vocab.size()), phone_vocab_size(phones.size()) {}
  JointIndex(std::int32_t words, std::int32_t phones)
      : word_vocab_size(words), phone_vocab_size(phones) {}

  std::int32_t total() const { return word_vocab_size + phone_vocab_size; }
  TokenId FromPhone(PhoneId p) const { return word_vocab_size + p; }
  PhoneId ToPhone(TokenId t) const { return t - word_vocab_size; }
  bool IsPhone(TokenId t) const { return t >= word_vocab_size && t < total(); }
  bool IsWord(TokenId t) const { return t >= 0 && t < word_vocab_size; }
  bool operator==(const JointIndex&) const = default;
};

enum class WsaLabel : std::int32_t { kMatch = 0, kMismatch = 1 };

// Encoder input. Pair layout is `[CLS] W [SEP] P [SEP]`; text-only layout is
// `[CLS] W [SEP]` with an empty phone region.
struct EncodedExample {
  std::vector<TokenId> input_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> position_ids;
  Span word_region;
  Span phone_region;
  // Whole-word spans in sequence positions: subtokens of each word, and the
  // phones of each word of the (possibly donor) phone sequence.
  std::vector<Span> word_spans;
  std::vector<Span> phone_word_spans;
  std::optional<WsaLabel> wsa_label;
  // Sequence position -> original joint id.
  std::map<std::int32_t, TokenId> mlm_targets;
  std::map<std::int32_t, TokenId> msm_targets;

  std::int32_t size() const { return static_cast<std::int32_t>(input_ids.size()); }
  bool has_phones() const { return !phone_region.empty(); }
  bool operator==(const EncodedExample&) const = default;
};

// Whole-word truncation drops trailing words of W together with trailing
// words of P until the layout fits; throws if even one word cannot fit.
EncodedExample EncodePair(const PairedUtterance& words_from, const PairedUtterance& phones_from,
                          const JointIndex& joint, std::int32_t max_seq_len);
EncodedExample EncodePair(const PairedUtterance& u, const JointIndex& joint,
                          std::int32_t max_seq_len);
EncodedExample EncodeText(const PairedUtterance& u, std::int32_t max_seq_len);

// Number of leading words kept by EncodeText under max_seq_len.
std::int32_t TextWordsThatFit(const PairedUtterance& u, std::int32_t max_seq_len);

}  // namespace tpslu

#endif  // TPSLU_TEXTPROC_HPP_
