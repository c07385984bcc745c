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

#ifndef TPSLU_SLU_DATA_HPP_
#define TPSLU_SLU_DATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tpslu {

struct Slot {
  std::string name;
  std::string value;
  bool operator==(const Slot&) const = default;
};

struct SemanticFrame {
  std::string intent;
  std::vector<Slot> slots;
  bool operator==(const SemanticFrame&) const = default;
};

struct SluExample {
  std::string text;
  SemanticFrame frame;
  std::vector<std::string> tags;  // per-word BIO tags
};

// Line-delimited JSON: {"text": ..., "intent": ..., plus "slots":
// [{"name": ..., "value": ...}] and/or per-word "tags": [...]}. Missing
// tags are derived from the slots and vice versa.
std::vector<SluExample> LoadSluJsonl(const std::string& path);
void SaveSluJsonl(const std::string& path, const std::vector<SluExample>& examples);
SluExample ParseSluRecord(const std::string& json_line);

// Tags each slot value at its first unused occurrence in `words`.
std::vector<std::string> SlotsToBio(const std::vector<std::string>& words,
                                    const std::vector<Slot>& slots);
// Contiguous B-x I-x ... runs become (x, joined words). Stray I-x starts a slot.
// Only the common prefix of words and tags is read, so tags predicted for a
// truncated input cover the leading words.
std::vector<Slot> BioToSlots(const std::vector<std::string>& words,
                             const std::vector<std::string>& tags);

class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> labels);
  std::optional<std::int32_t> Find(const std::string& label) const;
  std::int32_t Id(const std::string& label) const;  // throws if absent
  const std::string& Label(std::int32_t id) const;
  std::int32_t size() const { return static_cast<std::int32_t>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  bool operator==(const LabelMap& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct SluLabels {
  LabelMap intents;  // sorted
  LabelMap tags;     // "O" first, then sorted
  static SluLabels FromTraining(const std::vector<SluExample>& train);
  void Save(const std::string& path) const;
  static SluLabels Load(const std::string& path);
  bool operator==(const SluLabels&) const = default;
};

}  // namespace tpslu

#endif  // TPSLU_SLU_DATA_HPP_
