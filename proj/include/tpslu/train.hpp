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

#ifndef TPSLU_TRAIN_HPP_
#define TPSLU_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpslu/lexicon.hpp"
#include "tpslu/model.hpp"
#include "tpslu/pretraindata.hpp"
#include "tpslu/slu_data.hpp"
#include "tpslu/textproc.hpp"

namespace tpslu {

// Per-example objective. `total` is the plain sum of the present components.
struct LossBundle {
  std::optional<double> cond_mlm, cond_msm, mlm, msm, wsa, ic, sf;
  double total = 0.0;

  // Present components in a fixed order, with their display names.
  std::vector<std::pair<std::string, double>> Components() const;
  double SumOfComponents() const;
};

// Mean over rows of -log softmax(row)[gold]; 0 for an empty target list.
// When `d_logits` is given it receives d(mean loss)/d(logits).
double MaskedCrossEntropy(const Matrix& logits, std::span<const std::int32_t> gold,
                          Matrix* d_logits = nullptr);
double WsaLoss(const RowVector& logits, WsaLabel label, RowVector* d_logits = nullptr);

// Losses of the pre-training heads that were evaluated on one example.
struct TaskLosses {
  std::optional<double> word_lm;   // masked words
  std::optional<double> phone_lm;  // masked phones
  std::optional<double> wsa;
};

// Names the task losses after the example's loss flags (conditional variants
// on matched pairs, unconditional on mismatched ones). Throws kContract when
// the flags and the supplied losses disagree.
LossBundle CombinePretrainLosses(LossFlags flags, const TaskLosses& losses);
LossBundle CombinePretrainLosses(const PretrainExample& example, const TaskLosses& losses);

enum class FinetuneMode { kIcOnly, kJoint };
LossBundle FinetuneLoss(FinetuneMode mode, std::optional<double> ic, std::optional<double> sf);

// Everything one forward/backward pass needs. Pre-training examples carry
// targets and flags; fine-tuning examples carry intent and slot labels.
struct TrainingExample {
  EncodedExample encoded;
  LossFlags loss_flags = 0;
  std::vector<std::vector<TokenId>> word_phones;  // per word; empty disables phone augmentation
  double beta = 0.0;
  std::optional<std::int32_t> intent;
  std::vector<std::int32_t> slot_tags;  // per word, aligned with encoded.word_spans
};

TrainingExample FromPretrain(const PretrainExample& ex);

// Runs the model on `ex` and, when `grads` is non-null, accumulates
// grad_scale * d(total)/d(params) into it.
LossBundle ForwardBackward(const ModelParams& params, const TrainingExample& ex, ModelParams* grads,
                           bool train_mode, CounterRng* rng, double grad_scale = 1.0);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update of a single tensor at 1-based step `t`.
void AdamUpdate(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t t, double lr,
                const AdamConfig& cfg);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& like, AdamConfig cfg = {});
  // Throws kNumeric, naming the tensor, if any gradient is non-finite; the
  // parameters are left untouched in that case.
  void Step(ModelParams& params, const ModelParams& grads, double lr);
  std::int64_t step() const { return step_; }
  const ModelParams& first_moment() const { return m_; }
  const ModelParams& second_moment() const { return v_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  ModelParams m_;
  ModelParams v_;
  std::int64_t step_ = 0;
};

// Linear warmup from 0 to `peak`, then linear decay to 0 at max_steps.
struct LrSchedule {
  double peak = 1e-3;
  double warmup_fraction = 0.1;
  std::int64_t max_steps = 1;
  double At(std::int64_t step) const;
};

// Scales gradients so their global L2 norm is at most max_norm (<= 0
// disables). Returns the norm before clipping.
double ClipGradNorm(ModelParams& grads, double max_norm);

struct NamedTensor {
  std::string name;
  Matrix* value;
  const Matrix* analytic_grad;
};

struct GradCheckOptions {
  double epsilon = 1e-6;
  double tolerance = 1e-5;
  // Denominator floor of the relative error, so that coordinates with
  // near-zero gradient are judged on absolute error.
  double abs_floor = 1e-3;
  std::int32_t coords_per_tensor = 16;
  std::uint64_t seed = 0;
};

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::int32_t coords_checked = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  bool pass = true;
};

// Central finite differences of `loss` (which reads the tensors in place)
// against the analytic gradients on sampled coordinates.
GradCheckReport GradCheck(std::span<const NamedTensor> tensors, const std::function<double()>& loss,
                          const GradCheckOptions& options);
std::vector<NamedTensor> NamedTensors(ModelParams& params, const ModelParams& grads);

struct TrainConfig {
  std::int32_t batch_size = 8;
  std::int64_t max_steps = 2000;
  std::int64_t finetune_steps = 300;
  std::vector<double> pretrain_lr_grid{5e-4};
  std::vector<double> finetune_lr_grid{1e-3};
  double warmup_fraction = 0.1;
  double max_grad_norm = 1.0;
  std::int64_t eval_interval = 50;
  std::uint64_t seed = 0;
  // The engine is single-threaded with a fixed reduction order, so runs are
  // always reproducible; the flag is recorded for provenance.
  bool deterministic = true;

  void Validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossLogRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  // Batch means of each component over the examples where it is present.
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;
};

std::string LossLogLine(const LossLogRecord& record);

struct PretrainResult {
  ModelParams params;
  std::vector<LossLogRecord> log;
  double learning_rate = 0.0;
};

// Pre-trains over the static example set. With several learning rates the
// run with the lowest mean loss over its final 10% of steps is kept.
PretrainResult Pretrain(std::span<const PretrainExample> examples, const ModelConfig& model_config,
                        const TrainConfig& train_config, const ModelParams* init = nullptr);

// Mean total loss with dropout off.
double MeanPretrainLoss(const ModelParams& params, std::span<const PretrainExample> examples);

enum class FinetuneLayout { kAdditive, kConcat };

struct FinetuneOptions {
  FinetuneMode mode = FinetuneMode::kJoint;
  bool use_phone_embeddings = false;
  std::vector<double> beta_grid{0.1, 0.25, 0.5, 1.0};
  // kConcat feeds `[CLS] W [SEP] P [SEP]` instead of adding phone embeddings.
  FinetuneLayout layout = FinetuneLayout::kAdditive;
  bool operator==(const FinetuneOptions&) const = default;
};

// Turns SLU text into model inputs. The additive layout is `[CLS] W [SEP]`
// with optional summed phone embeddings at each word's first subtoken.
class SluEncoder {
 public:
  SluEncoder(const Lexicon& lexicon, const Vocab& vocab, std::int32_t max_seq_len,
             FinetuneLayout layout);
  TrainingExample Encode(const std::string& text, bool with_phones, double beta) const;
  TrainingExample EncodeLabeled(const SluExample& ex, const SluLabels& labels, FinetuneMode mode,
                                bool with_phones, double beta) const;
  std::vector<std::string> Words(const std::string& text) const;

 private:
  const Lexicon& lexicon_;
  const Vocab& vocab_;
  JointIndex joint_;
  std::int32_t max_seq_len_;
  FinetuneLayout layout_;
};

struct SluPrediction {
  std::int32_t intent = 0;
  std::vector<std::int32_t> tags;  // one per encoded word
};

SluPrediction Predict(const ModelParams& params, const TrainingExample& ex);

struct FinetuneRun {
  double learning_rate = 0.0;
  double beta = 0.0;
  double valid_icacc = 0.0;
  std::int64_t best_step = 0;
};

struct FinetuneResult {
  ModelParams params;
  SluLabels labels;
  double beta = 0.0;
  double learning_rate = 0.0;
  double valid_icacc = 0.0;
  std::vector<FinetuneRun> sweep;
  std::vector<LossLogRecord> log;  // of the selected run
};

// Fine-tunes from `init` on manual transcripts. Each (lr, beta) pair is
// trained separately; within a run the step with the best validation ICAcc
// is kept, and across runs the best validation ICAcc wins (ties: first in
// grid order).
FinetuneResult Finetune(const ModelParams& init, const Lexicon& lexicon, const Vocab& vocab,
                        const std::vector<SluExample>& train, const std::vector<SluExample>& valid,
                        const FinetuneOptions& options, const TrainConfig& train_config);

// Intent accuracy of `params` on `data` under the given input settings.
double EvaluateIntentAccuracy(const ModelParams& params, const SluEncoder& encoder,
                              const SluLabels& labels, const std::vector<SluExample>& data,
                              bool with_phones, double beta);

}  // namespace tpslu

#endif  // TPSLU_TRAIN_HPP_
