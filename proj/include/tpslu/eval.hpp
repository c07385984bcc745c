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

#ifndef TPSLU_EVAL_HPP_
#define TPSLU_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpslu/model.hpp"
#include "tpslu/slu_data.hpp"
#include "tpslu/textproc.hpp"

namespace tpslu {

// Fraction of positions where prediction equals gold. Throws on empty or
// mismatched inputs.
double IntentAccuracy(std::span<const std::string> predictions, std::span<const std::string> golds);

struct SemErCounts {
  std::int64_t cor = 0;
  std::int64_t del = 0;
  std::int64_t ins = 0;
  std::int64_t sub = 0;

  SemErCounts& operator+=(const SemErCounts& o);
  bool operator==(const SemErCounts&) const = default;
  // (del + ins + sub) / (cor + del + sub); throws when the denominator is 0.
  double Value() const;
};

// Counts errors of `hyp` against `ref`. The intent is scored as one extra
// slot (Cor when equal, Sub otherwise). Slots are matched per name as
// multisets: equal values first (Cor), then remaining same-name pairs (Sub);
// the rest are Del (reference) or Ins (hypothesis).
SemErCounts SemerCounts(const SemanticFrame& ref, const SemanticFrame& hyp);

struct SemerResult {
  SemErCounts counts;
  double value = 0.0;
};
SemerResult Semer(const SemanticFrame& ref, const SemanticFrame& hyp);

enum class EditOp : std::uint8_t { kMatch, kSub, kDel, kIns };

struct AlignedPair {
  EditOp op;
  std::int32_t ref_index;  // -1 for insertions
  std::int32_t hyp_index;  // -1 for deletions
};

struct Alignment {
  std::vector<AlignedPair> ops;
  std::int32_t cost = 0;
};

// Minimum edit distance alignment with unit costs. Among optimal paths the
// backtrace prefers match, then substitution, deletion, insertion.
Alignment AlignWords(std::span<const std::string> ref, std::span<const std::string> hyp);

struct ConfusionPair {
  std::string hyp_word;
  std::string ref_word;
  std::int64_t count = 0;
  bool operator==(const ConfusionPair&) const = default;
};

// Tallies substitution-aligned (hyp, ref) word pairs over the corpora. When
// `vocab_filter` is given, pairs with a word that is not a single vocabulary
// token are dropped. Sorted by count (descending), then (hyp, ref); the
// first top_k are returned (0 keeps all).
std::vector<ConfusionPair> ExtractConfusionPairs(const std::vector<std::string>& refs,
                                                 const std::vector<std::string>& hyps,
                                                 std::size_t top_k, const Vocab* vocab_filter);

double CosineSimilarity(const RowVector& a, const RowVector& b);

struct MrrResult {
  double mrr = 0.0;
  std::vector<std::int64_t> ranks;  // per pair
};

// For each pair, ranks every whole-word vocabulary token except the query
// hyp_word by cosine similarity to it (ties: lower id first) and takes the
// reciprocal rank of ref_word. `embeddings` rows are indexed by token id.
MrrResult Mrr(std::span<const ConfusionPair> pairs, const Matrix& embeddings, const Vocab& vocab);

struct MetricReport {
  std::string model_label;
  std::optional<double> icacc;
  std::optional<SemErCounts> semer;
  std::optional<double> mrr;
  std::vector<ConfusionPair> confusion_pairs;
};

// Pretty JSON with sections icacc, semer {cor, del, ins, sub, value}, mrr
// and confusion_pairs.
std::string ReportJson(const MetricReport& report);
// One JSON object per metric and per confusion pair.
std::string ReportJsonl(const MetricReport& report);
// "label<TAB>value" lines with four decimals, one per model.
std::string FormatMrrTable(const std::vector<std::pair<std::string, double>>& rows);

}  // namespace tpslu

#endif  // TPSLU_EVAL_HPP_
