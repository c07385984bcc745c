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

#include "tpslu/textproc.hpp"

#include <fstream>

#include "tpslu/error.hpp"

namespace tpslu {
namespace {

const char* const kSpecials[] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};
constexpr std::size_t kMaxCharsPerWord = 100;

}  // namespace

Vocab Vocab::FromTokens(std::vector<std::string> tokens) {
  if (tokens.size() < static_cast<std::size_t>(kNumSpecial)) {
    throw Error(ErrorCode::kFormat, "vocabulary must contain the five special tokens");
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(kNumSpecial); ++i) {
    if (tokens[i] != kSpecials[i]) {
      throw Error(ErrorCode::kFormat, "vocabulary id " + std::to_string(i) + " must be " +
                                          kSpecials[i] + ", found '" + tokens[i] + "'");
    }
  }
  Vocab vocab;
  vocab.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    if (vocab.tokens_[i].empty()) {
      throw Error(ErrorCode::kFormat, "empty vocabulary token at id " + std::to_string(i));
    }
    if (!vocab.index_.emplace(vocab.tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::kFormat, "duplicate vocabulary token: " + vocab.tokens_[i]);
    }
  }
  return vocab;
}

Vocab Vocab::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vocabulary: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return FromTokens(std::move(tokens));
}

void Vocab::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write vocabulary: " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

std::optional<TokenId> Vocab::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::Id(std::string_view token) const {
  auto id = Find(token);
  if (!id) throw Error(ErrorCode::kInvalidArgument, "token not in vocabulary: " + std::string(token));
  return *id;
}

const std::string& Vocab::Token(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw Error(ErrorCode::kInvalidArgument, "token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::WordTokenIds() const {
  std::vector<TokenId> ids;
  for (TokenId i = kNumSpecial; i < size(); ++i) {
    if (tokens_[static_cast<std::size_t>(i)].rfind("##", 0) != 0) ids.push_back(i);
  }
  return ids;
}

Tokenized Tokenize(const Vocab& vocab, std::string_view text) {
  Tokenized out;
  for (const auto& raw : SplitWhitespace(text)) {
    const std::string word = ToLower(raw);
    const auto begin = static_cast<std::int32_t>(out.ids.size());
    std::vector<TokenId> pieces;
    bool ok = word.size() <= kMaxCharsPerWord;
    std::size_t start = 0;
    while (ok && start < word.size()) {
      std::size_t end = word.size();
      std::optional<TokenId> found;
      while (start < end) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece = "##" + piece;
        found = vocab.Find(piece);
        if (found) break;
        --end;
      }
      if (!found) {
        ok = false;
        break;
      }
      pieces.push_back(*found);
      start = end;
    }
    if (ok) {
      out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
    } else {
      out.ids.push_back(Vocab::kUnk);
    }
    out.word_spans.push_back({begin, static_cast<std::int32_t>(out.ids.size())});
  }
  return out;
}

PairedUtterance BuildPaired(const Lexicon& lex, const Vocab& vocab, std::string_view text) {
  PairedUtterance u;
  for (const auto& w : SplitWhitespace(text)) u.words.push_back(ToLower(w));
  if (u.words.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot pair an empty utterance");
  for (const auto& w : u.words) {
    Tokenized t = Tokenize(vocab, w);
    const auto sb = static_cast<std::int32_t>(u.subtokens.size());
    u.subtokens.insert(u.subtokens.end(), t.ids.begin(), t.ids.end());
    u.word_subtoken_spans.push_back({sb, static_cast<std::int32_t>(u.subtokens.size())});

    auto phones = lex.Lookup(w);
    const auto pb = static_cast<std::int32_t>(u.phones.size());
    u.phones.insert(u.phones.end(), phones.begin(), phones.end());
    u.word_phone_spans.push_back({pb, static_cast<std::int32_t>(u.phones.size())});
  }
  return u;
}

namespace {

std::int32_t SubtokensOf(const PairedUtterance& u, std::int32_t words) {
  return words == 0 ? 0 : u.word_subtoken_spans[static_cast<std::size_t>(words - 1)].end;
}

std::int32_t PhonesOf(const PairedUtterance& u, std::int32_t words) {
  return words == 0 ? 0 : u.word_phone_spans[static_cast<std::size_t>(words - 1)].end;
}

}  // namespace

EncodedExample EncodePair(const PairedUtterance& words_from, const PairedUtterance& phones_from,
                          const JointIndex& joint, std::int32_t max_seq_len) {
  std::int32_t nw = words_from.num_words();
  std::int32_t np = phones_from.num_words();
  if (nw == 0 || np == 0) throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty utterance");
  auto length = [&] { return 3 + SubtokensOf(words_from, nw) + PhonesOf(phones_from, np); };
  while (length() > max_seq_len && (nw > 1 || np > 1)) {
    if (nw > 1) --nw;
    if (np > 1) --np;
  }
  if (length() > max_seq_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "utterance does not fit max_seq_len=" + std::to_string(max_seq_len) +
                    " even with a single word");
  }

  EncodedExample ex;
  auto push = [&](TokenId id, std::int32_t segment) {
    ex.input_ids.push_back(id);
    ex.segment_ids.push_back(segment);
    ex.position_ids.push_back(static_cast<std::int32_t>(ex.position_ids.size()));
  };
  push(Vocab::kCls, 0);
  const std::int32_t wbeg = 1;
  for (std::int32_t i = 0; i < SubtokensOf(words_from, nw); ++i) {
    push(words_from.subtokens[static_cast<std::size_t>(i)], 0);
  }
  ex.word_region = {wbeg, ex.size()};
  for (std::int32_t w = 0; w < nw; ++w) {
    const Span& s = words_from.word_subtoken_spans[static_cast<std::size_t>(w)];
    ex.word_spans.push_back({wbeg + s.begin, wbeg + s.end});
  }
  push(Vocab::kSep, 0);
  const std::int32_t pbeg = ex.size();
  for (std::int32_t i = 0; i < PhonesOf(phones_from, np); ++i) {
    push(joint.FromPhone(phones_from.phones[static_cast<std::size_t>(i)]), 1);
  }
  ex.phone_region = {pbeg, ex.size()};
  for (std::int32_t w = 0; w < np; ++w) {
    const Span& s = phones_from.word_phone_spans[static_cast<std::size_t>(w)];
    ex.phone_word_spans.push_back({pbeg + s.begin, pbeg + s.end});
  }
  push(Vocab::kSep, 1);
  return ex;
}

EncodedExample EncodePair(const PairedUtterance& u, const JointIndex& joint,
                          std::int32_t max_seq_len) {
  return EncodePair(u, u, joint, max_seq_len);
}

std::int32_t TextWordsThatFit(const PairedUtterance& u, std::int32_t max_seq_len) {
  std::int32_t nw = u.num_words();
  while (nw > 0 && 2 + SubtokensOf(u, nw) > max_seq_len) --nw;
  return nw;
}

EncodedExample EncodeText(const PairedUtterance& u, std::int32_t max_seq_len) {
  const std::int32_t nw = TextWordsThatFit(u, max_seq_len);
  if (nw == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "utterance does not fit max_seq_len=" + std::to_string(max_seq_len) +
                    " even with a single word");
  }
  EncodedExample ex;
  auto push = [&](TokenId id) {
    ex.input_ids.push_back(id);
    ex.segment_ids.push_back(0);
    ex.position_ids.push_back(static_cast<std::int32_t>(ex.position_ids.size()));
  };
  push(Vocab::kCls);
  for (std::int32_t i = 0; i < SubtokensOf(u, nw); ++i) push(u.subtokens[static_cast<std::size_t>(i)]);
  ex.word_region = {1, ex.size()};
  for (std::int32_t w = 0; w < nw; ++w) {
    const Span& s = u.word_subtoken_spans[static_cast<std::size_t>(w)];
    ex.word_spans.push_back({1 + s.begin, 1 + s.end});
  }
  push(Vocab::kSep);
  ex.phone_region = {ex.size(), ex.size()};
  return ex;
}

}  // namespace tpslu
