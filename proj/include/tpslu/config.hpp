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

#ifndef TPSLU_CONFIG_HPP_
#define TPSLU_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "tpslu/model.hpp"
#include "tpslu/pretraindata.hpp"
#include "tpslu/train.hpp"

namespace tpslu {

struct PathsConfig {
  std::string dict;        // pronunciation dictionary
  std::string vocab;       // WordPiece vocabulary, one token per line
  std::string corpus;      // pre-training transcripts, one per line
  std::string slu_train;   // SLU records (JSONL)
  std::string slu_valid;
  std::string slu_test;
  std::string asr_hyps;    // 1-best transcripts aligned line by line with slu_test
  std::string mrr_refs;    // reference transcripts for confusion pairs
  std::string mrr_hyps;    // matching ASR 1-best transcripts
  std::string out_dir = "out";
  // Empty means the default location under out_dir.
  std::string pretrain_checkpoint;
  std::string finetune_checkpoint;
  bool operator==(const PathsConfig&) const = default;
};

struct PrepareConfig {
  // Masked copies generated per corpus utterance.
  std::int32_t dupe_factor = 5;
  bool operator==(const PrepareConfig&) const = default;
};

struct EvalConfig {
  std::int32_t top_k = 20;
  // Score slu_test against asr_hyps when set, otherwise the manual text.
  bool use_asr = true;
  std::string model_label;
  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  // Named pre-training task combination; empty for an explicit masking block.
  std::string preset;
  MaskingConfig masking;
  ModelConfig model;
  TrainConfig train;
  FinetuneOptions finetune;
  PrepareConfig prepare;
  EvalConfig eval;
  PathsConfig paths;
  bool operator==(const RunConfig&) const = default;

  std::string PretrainCheckpointPath() const;
  std::string FinetuneCheckpointPath() const;
  std::string ShardDir() const;
};

// Task presets, named after the pre-training combinations they reproduce:
// "+MLM 15%", "+MLM 15%+NSP", "+condMLM 100%+condMSM 100%(oneMod)", ...
const std::vector<std::string>& PresetNames();
// Returns `base` with the preset's strategy, percentages and WSA switch.
MaskingConfig ApplyPreset(const std::string& name, MaskingConfig base);

// JSON document with sections preset, masking, model, train, finetune,
// prepare, eval and paths. On parse the preset is applied first and any
// explicit masking keys then override it; missing keys keep defaults.
std::string RunConfigToJson(const RunConfig& cfg);
RunConfig RunConfigFromJson(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig LoadRunConfig(const std::string& path, const std::vector<std::string>& overrides = {});
void SaveRunConfig(const std::string& path, const RunConfig& cfg);

// Throws kConfig on invalid masking, model or training settings. Vocabulary
// sizes may still be 0 here; they are filled in from the data.
void ValidateRunConfig(const RunConfig& cfg);

std::string ModelConfigToJson(const ModelConfig& cfg);
ModelConfig ModelConfigFromJson(const std::string& text);

}  // namespace tpslu

#endif  // TPSLU_CONFIG_HPP_
