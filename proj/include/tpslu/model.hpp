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

#ifndef TPSLU_MODEL_HPP_
#define TPSLU_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tpslu/rng.hpp"
#include "tpslu/textproc.hpp"

namespace tpslu {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct ModelConfig {
  std::int32_t num_layers = 2;
  std::int32_t hidden_dim = 64;
  std::int32_t num_heads = 4;
  std::int32_t ffn_dim = 256;
  std::int32_t max_seq_len = 128;
  std::int32_t vocab_size = 0;       // joint word + phone id space
  std::int32_t word_vocab_size = 0;  // phone ids start here
  std::int32_t num_segments = 2;
  double dropout = 0.1;
  std::int32_t num_intents = 0;
  std::int32_t num_slot_tags = 0;
  // Restrict masked-word logits to word ids and masked-phone logits to phone
  // ids instead of one joint softmax.
  bool restrict_lm_support = false;

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  Matrix ln1_gamma, ln1_beta;
  Matrix w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  Matrix ln2_gamma, ln2_beta;
  Matrix w_ff1, b_ff1, w_ff2, b_ff2;
};

// Weights are stored [in, out]; biases and norm parameters are 1 x n.
struct ModelParams {
  ModelConfig config;
  Matrix token_embedding;     // [vocab, hidden]
  Matrix position_embedding;  // [max_seq_len, hidden]
  Matrix segment_embedding;   // [segments, hidden]
  std::vector<LayerParams> layers;
  Matrix final_ln_gamma, final_ln_beta;
  Matrix lm_bias;          // tied LM head: logits = h E^T + lm_bias
  Matrix wsa_w, wsa_b;     // [hidden, 2]
  Matrix ic_ff_w, ic_ff_b; // F^I
  Matrix ic_w, ic_b;       // W^I, b^I
  Matrix sf_w, sf_b;       // W^S, b^S

  // Truncated normal (stddev 0.02) weights, zero biases, unit norm gains.
  static ModelParams Initialize(const ModelConfig& config, CounterRng& rng);
  static ModelParams ZerosLike(const ModelParams& other);
  void SetZero();
  // Re-creates the IC and SF heads with fresh weights.
  void ResetHeads(std::int32_t num_intents, std::int32_t num_slot_tags, CounterRng& rng);

  // Visits every tensor in a fixed order with a stable name.
  template <class F>
  void ForEach(F&& f) { Visit(*this, f); }
  template <class F>
  void ForEach(F&& f) const { Visit(*this, f); }

  std::size_t NumParameters() const;
  bool AllFinite() const;

 private:
  template <class Self, class F>
  static void Visit(Self& self, F& f) {
    f(std::string("embeddings.token"), self.token_embedding);
    f(std::string("embeddings.position"), self.position_embedding);
    f(std::string("embeddings.segment"), self.segment_embedding);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "encoder.layer" + std::to_string(i) + ".";
      f(p + "ln1.gamma", l.ln1_gamma);
      f(p + "ln1.beta", l.ln1_beta);
      f(p + "attn.w_q", l.w_q);
      f(p + "attn.b_q", l.b_q);
      f(p + "attn.w_k", l.w_k);
      f(p + "attn.b_k", l.b_k);
      f(p + "attn.w_v", l.w_v);
      f(p + "attn.b_v", l.b_v);
      f(p + "attn.w_o", l.w_o);
      f(p + "attn.b_o", l.b_o);
      f(p + "ln2.gamma", l.ln2_gamma);
      f(p + "ln2.beta", l.ln2_beta);
      f(p + "ffn.w1", l.w_ff1);
      f(p + "ffn.b1", l.b_ff1);
      f(p + "ffn.w2", l.w_ff2);
      f(p + "ffn.b2", l.b_ff2);
    }
    f(std::string("encoder.final_ln.gamma"), self.final_ln_gamma);
    f(std::string("encoder.final_ln.beta"), self.final_ln_beta);
    f(std::string("heads.lm.bias"), self.lm_bias);
    f(std::string("heads.wsa.w"), self.wsa_w);
    f(std::string("heads.wsa.b"), self.wsa_b);
    f(std::string("heads.ic.ff_w"), self.ic_ff_w);
    f(std::string("heads.ic.ff_b"), self.ic_ff_b);
    f(std::string("heads.ic.w"), self.ic_w);
    f(std::string("heads.ic.b"), self.ic_b);
    f(std::string("heads.sf.w"), self.sf_w);
    f(std::string("heads.sf.b"), self.sf_b);
  }
};

// token_emb[id] + pos_emb[position] + seg_emb[segment] per row.
Matrix EmbedInput(const ModelParams& params, const EncodedExample& ex);

// Adds beta * sum of the word's phone embeddings at the first subtoken of
// each word. `word_phones[i]` holds joint phone ids for ex.word_spans[i].
Matrix EmbedInputWithPhones(const ModelParams& params, const EncodedExample& ex,
                            std::span<const std::vector<TokenId>> word_phones, double beta);

struct EncoderOutput {
  Matrix hidden;  // [T, hidden_dim]
  RowVector cls() const { return hidden.row(0); }
};

struct LayerCache {
  Matrix x_in;
  Matrix ln1_xhat;
  Eigen::VectorXd ln1_rstd;
  Matrix a, q, k, v;
  std::vector<Matrix> probs;  // per head [T, T]
  Matrix ctx;
  Matrix attn_drop;
  Matrix x_mid;
  Matrix ln2_xhat;
  Eigen::VectorXd ln2_rstd;
  Matrix b, u, g;
  Matrix ffn_drop;
};

struct EncoderCache {
  std::vector<std::uint8_t> key_valid;
  Matrix input_drop;
  std::vector<LayerCache> layers;
  Matrix final_xhat;
  Eigen::VectorXd final_rstd;
};

// Pre-norm transformer stack followed by a final layer norm (the final norm
// is part of the stack, so zero layers is the identity). `attention_mask`
// holds 1 for real positions and 0 for padding; empty means all real.
// Dropout is applied only in train_mode and then requires `rng`.
EncoderOutput Encode(const ModelParams& params, const Matrix& input_embeddings,
                     std::span<const std::uint8_t> attention_mask, bool train_mode,
                     CounterRng* rng, EncoderCache* cache = nullptr);

// Accumulates parameter gradients into `grads`; returns d(input_embeddings).
Matrix EncodeBackward(const ModelParams& params, const EncoderCache& cache, const Matrix& d_hidden,
                      ModelParams& grads);

// Scatters d(input_embeddings) into the embedding tables.
void EmbedBackward(const EncodedExample& ex, std::span<const std::vector<TokenId>> word_phones,
                   double beta, const Matrix& d_input, ModelParams& grads);

// Intent logits: W^I tanh(F^I h_cls) + b^I.
RowVector IcLogits(const ModelParams& params, const RowVector& h_cls);
// One row per word, taken at the word's first subtoken.
Matrix SfLogits(const ModelParams& params, const Matrix& hidden,
                std::span<const std::int32_t> first_subtoken_index, Span word_region);
// Tied projection over the joint vocabulary (or [lo, hi) when given).
Matrix LmLogits(const ModelParams& params, const Matrix& hidden,
                std::span<const std::int32_t> target_positions, std::int32_t lo = 0,
                std::int32_t hi = -1);
RowVector WsaLogits(const ModelParams& params, const RowVector& h_cls);

// Index of the maximum; ties go to the lowest index.
std::int32_t Argmax(const RowVector& logits);

double Gelu(double x);
double GeluGrad(double x);

inline constexpr double kLayerNormEps = 1e-12;

}  // namespace tpslu

#endif  // TPSLU_MODEL_HPP_
