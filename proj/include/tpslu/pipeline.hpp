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

#ifndef TPSLU_PIPELINE_HPP_
#define TPSLU_PIPELINE_HPP_

#include <functional>
#include <string>
#include <vector>

#include "tpslu/config.hpp"
#include "tpslu/eval.hpp"
#include "tpslu/slu_data.hpp"

namespace tpslu {

// Each command validates the config and checks its input paths before doing
// any work, writes its outputs under paths.out_dir and echoes the effective
// config there as <command>_config.json.

// Writes phones.txt and lexicon_stats.json (entry count, phone count and,
// when paths.corpus is set, the unknown-word rate over the corpus).
void CmdBuildLexicon(const RunConfig& cfg);

// Masks paths.corpus into shards/shard-NNNNN.bin and writes
// prepare_report.json with masking statistics.
void CmdPrepare(const RunConfig& cfg);

// Trains on the prepared shards (preparing them first when absent). Writes
// the pre-training checkpoint, pretrain_loss.jsonl and pretrain_report.json.
void CmdPretrain(const RunConfig& cfg);

// Fine-tunes the pre-training checkpoint on slu_train, selecting on
// slu_valid. Writes the checkpoint with .labels.json and .meta.json beside
// it, plus finetune_loss.jsonl and finetune_report.json.
void CmdFinetune(const RunConfig& cfg);

struct FramePrediction {
  std::string intent;
  std::vector<Slot> slots;
};
// Maps (input text, example index) to a predicted frame.
using FramePredictor = std::function<FramePrediction(const std::string&, std::size_t)>;

// Scores `predict` on slu_test, reading inputs from asr_hyps when
// eval.use_asr is set. Confusion pairs come from the test references and
// the ASR inputs.
MetricReport EvaluateTestSet(const RunConfig& cfg, const FramePredictor& predict);

// Evaluates the fine-tuned checkpoint; writes eval_report.json and
// eval_report.jsonl.
void CmdEval(const RunConfig& cfg);
// Same outputs for an arbitrary predictor.
void CmdEval(const RunConfig& cfg, const FramePredictor& predict);

// MRR of confusion pairs from mrr_refs/mrr_hyps over the pre-trained input
// embeddings. Writes mrr_report.json and mrr_table.tsv.
void CmdMrr(const RunConfig& cfg);

std::vector<std::string> ReadLines(const std::string& path);
void WriteText(const std::string& path, const std::string& text);

}  // namespace tpslu

#endif  // TPSLU_PIPELINE_HPP_
