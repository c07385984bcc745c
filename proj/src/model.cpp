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

#include "tpslu/model.hpp"

#include <cmath>
#include <limits>

#include "tpslu/error.hpp"

namespace tpslu {

void ModelConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, "model config: " + msg); };
  if (num_layers < 0) fail("num_layers must be non-negative");
  if (hidden_dim <= 0 || num_heads <= 0 || ffn_dim <= 0) fail("dimensions must be positive");
  if (hidden_dim % num_heads != 0) fail("hidden_dim must be divisible by num_heads");
  if (max_seq_len <= 0) fail("max_seq_len must be positive");
  if (vocab_size <= 0) fail("vocab_size must be positive");
  if (word_vocab_size <= 0 || word_vocab_size > vocab_size) fail("word_vocab_size out of range");
  if (num_segments != 2) fail("num_segments must be 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (num_intents < 0 || num_slot_tags < 0) fail("head sizes must be non-negative");
}

namespace {

Matrix Normal(std::int64_t rows, std::int64_t cols, CounterRng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.TruncatedNormal(0.02);
  return m;
}

Matrix Zeros(std::int64_t rows, std::int64_t cols) { return Matrix::Zero(rows, cols); }
Matrix Ones(std::int64_t rows, std::int64_t cols) { return Matrix::Ones(rows, cols); }

}  // namespace

ModelParams ModelParams::Initialize(const ModelConfig& config, CounterRng& rng) {
  config.Validate();
  const std::int64_t h = config.hidden_dim;
  const std::int64_t f = config.ffn_dim;
  ModelParams p;
  p.config = config;
  p.token_embedding = Normal(config.vocab_size, h, rng);
  p.position_embedding = Normal(config.max_seq_len, h, rng);
  p.segment_embedding = Normal(config.num_segments, h, rng);
  for (std::int32_t i = 0; i < config.num_layers; ++i) {
    LayerParams l;
    l.ln1_gamma = Ones(1, h);
    l.ln1_beta = Zeros(1, h);
    l.w_q = Normal(h, h, rng);
    l.b_q = Zeros(1, h);
    l.w_k = Normal(h, h, rng);
    l.b_k = Zeros(1, h);
    l.w_v = Normal(h, h, rng);
    l.b_v = Zeros(1, h);
    l.w_o = Normal(h, h, rng);
    l.b_o = Zeros(1, h);
    l.ln2_gamma = Ones(1, h);
    l.ln2_beta = Zeros(1, h);
    l.w_ff1 = Normal(h, f, rng);
    l.b_ff1 = Zeros(1, f);
    l.w_ff2 = Normal(f, h, rng);
    l.b_ff2 = Zeros(1, h);
    p.layers.push_back(std::move(l));
  }
  p.final_ln_gamma = Ones(1, h);
  p.final_ln_beta = Zeros(1, h);
  p.lm_bias = Zeros(1, config.vocab_size);
  p.wsa_w = Normal(h, 2, rng);
  p.wsa_b = Zeros(1, 2);
  p.ResetHeads(config.num_intents, config.num_slot_tags, rng);
  return p;
}

void ModelParams::ResetHeads(std::int32_t num_intents, std::int32_t num_slot_tags, CounterRng& rng) {
  const std::int64_t h = config.hidden_dim;
  config.num_intents = num_intents;
  config.num_slot_tags = num_slot_tags;
  ic_ff_w = Normal(h, h, rng);
  ic_ff_b = Zeros(1, h);
  ic_w = Normal(h, num_intents, rng);
  ic_b = Zeros(1, num_intents);
  sf_w = Normal(h, num_slot_tags, rng);
  sf_b = Zeros(1, num_slot_tags);
}

ModelParams ModelParams::ZerosLike(const ModelParams& other) {
  ModelParams z = other;
  z.SetZero();
  return z;
}

void ModelParams::SetZero() {
  ForEach([](const std::string&, Matrix& m) { m.setZero(); });
}

std::size_t ModelParams::NumParameters() const {
  std::size_t n = 0;
  ForEach([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool ModelParams::AllFinite() const {
  bool ok = true;
  ForEach([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

namespace {

void CheckId(std::int32_t id, Eigen::Index limit, const char* what) {
  if (id < 0 || id >= limit) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " id out of range: " + std::to_string(id));
  }
}

}  // namespace

Matrix EmbedInput(const ModelParams& params, const EncodedExample& ex) {
  const auto t = static_cast<Eigen::Index>(ex.input_ids.size());
  if (ex.segment_ids.size() != ex.input_ids.size() || ex.position_ids.size() != ex.input_ids.size()) {
    throw Error(ErrorCode::kInvalidArgument, "id sequences differ in length");
  }
  Matrix out(t, params.config.hidden_dim);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto s = static_cast<std::size_t>(i);
    CheckId(ex.input_ids[s], params.token_embedding.rows(), "token");
    CheckId(ex.position_ids[s], params.position_embedding.rows(), "position");
    CheckId(ex.segment_ids[s], params.segment_embedding.rows(), "segment");
    out.row(i) = params.token_embedding.row(ex.input_ids[s]) +
                 params.position_embedding.row(ex.position_ids[s]) +
                 params.segment_embedding.row(ex.segment_ids[s]);
  }
  return out;
}

Matrix EmbedInputWithPhones(const ModelParams& params, const EncodedExample& ex,
                            std::span<const std::vector<TokenId>> word_phones, double beta) {
  if (beta < 0.0) throw Error(ErrorCode::kConfig, "beta must be non-negative");
  if (word_phones.size() != ex.word_spans.size()) {
    throw Error(ErrorCode::kInvalidArgument, "word_phones must have one entry per word");
  }
  Matrix out = EmbedInput(params, ex);
  for (std::size_t w = 0; w < word_phones.size(); ++w) {
    RowVector sum = RowVector::Zero(params.config.hidden_dim);
    for (TokenId p : word_phones[w]) {
      CheckId(p, params.token_embedding.rows(), "phone");
      sum += params.token_embedding.row(p);
    }
    // beta = 0 must reproduce EmbedInput bit for bit, signed zeros included.
    if (beta != 0.0) out.row(ex.word_spans[w].begin) += beta * sum;
  }
  return out;
}

void EmbedBackward(const EncodedExample& ex, std::span<const std::vector<TokenId>> word_phones,
                   double beta, const Matrix& d_input, ModelParams& grads) {
  for (Eigen::Index i = 0; i < d_input.rows(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    grads.token_embedding.row(ex.input_ids[s]) += d_input.row(i);
    grads.position_embedding.row(ex.position_ids[s]) += d_input.row(i);
    grads.segment_embedding.row(ex.segment_ids[s]) += d_input.row(i);
  }
  if (beta == 0.0) return;
  for (std::size_t w = 0; w < word_phones.size(); ++w) {
    const auto row = d_input.row(ex.word_spans[w].begin);
    for (TokenId p : word_phones[w]) grads.token_embedding.row(p) += beta * row;
  }
}

double Gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double GeluGrad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
  return cdf + x * pdf;
}

namespace {

void LayerNorm(const Matrix& x, const Matrix& gamma, const Matrix& beta, Matrix& y, Matrix& xhat,
               Eigen::VectorXd& rstd) {
  const Eigen::Index n = x.cols();
  xhat.resize(x.rows(), n);
  rstd.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / static_cast<double>(n);
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
  }
  y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
}

Matrix LayerNormBackward(const Matrix& dy, const Matrix& xhat, const Eigen::VectorXd& rstd,
                         const Matrix& gamma, Matrix& dgamma, Matrix& dbeta) {
  dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
  const double n = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / n;
    const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / n;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx);
  }
  return dx;
}

Matrix Affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

Matrix DropoutMask(Eigen::Index rows, Eigen::Index cols, double p, CounterRng& rng) {
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform() < p ? 0.0 : keep;
  return m;
}

void CheckFinite(const Matrix& m, std::size_t layer) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kNumeric,
                "non-finite activations in encoder layer " + std::to_string(layer));
  }
}

}  // namespace

EncoderOutput Encode(const ModelParams& params, const Matrix& input_embeddings,
                     std::span<const std::uint8_t> attention_mask, bool train_mode, CounterRng* rng,
                     EncoderCache* cache) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index t = input_embeddings.rows();
  if (input_embeddings.cols() != cfg.hidden_dim) {
    throw Error(ErrorCode::kInvalidArgument, "input embedding width does not match hidden_dim");
  }
  if (!attention_mask.empty() && static_cast<Eigen::Index>(attention_mask.size()) != t) {
    throw Error(ErrorCode::kInvalidArgument, "attention mask length does not match input");
  }
  const bool dropout = train_mode && cfg.dropout > 0.0;
  if (dropout && rng == nullptr) throw Error(ErrorCode::kInvalidArgument, "dropout requires an rng");

  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.key_valid.assign(static_cast<std::size_t>(t), 1);
  if (!attention_mask.empty()) c.key_valid.assign(attention_mask.begin(), attention_mask.end());
  c.layers.assign(params.layers.size(), LayerCache{});

  Matrix x = input_embeddings;
  c.input_drop.resize(0, 0);
  if (dropout) {
    c.input_drop = DropoutMask(t, x.cols(), cfg.dropout, *rng);
    x.array() *= c.input_drop.array();
  }

  const Eigen::Index heads = cfg.num_heads;
  const Eigen::Index d = cfg.hidden_dim / cfg.num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const LayerParams& l = params.layers[li];
    LayerCache& lc = c.layers[li];
    lc.x_in = x;
    LayerNorm(x, l.ln1_gamma, l.ln1_beta, lc.a, lc.ln1_xhat, lc.ln1_rstd);
    lc.q = Affine(lc.a, l.w_q, l.b_q);
    lc.k = Affine(lc.a, l.w_k, l.b_k);
    lc.v = Affine(lc.a, l.w_v, l.b_v);
    lc.ctx.resize(t, cfg.hidden_dim);
    lc.probs.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix s = lc.q.middleCols(h * d, d) * lc.k.middleCols(h * d, d).transpose();
      s *= scale;
      Matrix& p = lc.probs[static_cast<std::size_t>(h)];
      p.resize(t, t);
      for (Eigen::Index i = 0; i < t; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < t; ++j) {
          if (c.key_valid[static_cast<std::size_t>(j)]) mx = std::max(mx, s(i, j));
        }
        double z = 0.0;
        for (Eigen::Index j = 0; j < t; ++j) {
          const double e = c.key_valid[static_cast<std::size_t>(j)] ? std::exp(s(i, j) - mx) : 0.0;
          p(i, j) = e;
          z += e;
        }
        p.row(i) /= z;
      }
      lc.ctx.middleCols(h * d, d).noalias() = p * lc.v.middleCols(h * d, d);
    }
    Matrix o = Affine(lc.ctx, l.w_o, l.b_o);
    if (dropout) {
      lc.attn_drop = DropoutMask(t, o.cols(), cfg.dropout, *rng);
      o.array() *= lc.attn_drop.array();
    }
    lc.x_mid = x + o;
    LayerNorm(lc.x_mid, l.ln2_gamma, l.ln2_beta, lc.b, lc.ln2_xhat, lc.ln2_rstd);
    lc.u = Affine(lc.b, l.w_ff1, l.b_ff1);
    lc.g = lc.u.unaryExpr([](double v) { return Gelu(v); });
    Matrix f = Affine(lc.g, l.w_ff2, l.b_ff2);
    if (dropout) {
      lc.ffn_drop = DropoutMask(t, f.cols(), cfg.dropout, *rng);
      f.array() *= lc.ffn_drop.array();
    }
    x = lc.x_mid + f;
    CheckFinite(x, li);
  }

  EncoderOutput out;
  if (params.layers.empty()) {
    out.hidden = std::move(x);
  } else {
    LayerNorm(x, params.final_ln_gamma, params.final_ln_beta, out.hidden, c.final_xhat, c.final_rstd);
    CheckFinite(out.hidden, params.layers.size() - 1);
  }
  return out;
}

Matrix EncodeBackward(const ModelParams& params, const EncoderCache& c, const Matrix& d_hidden,
                      ModelParams& grads) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index heads = cfg.num_heads;
  const Eigen::Index d = cfg.hidden_dim / cfg.num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix dx = d_hidden;
  if (!params.layers.empty()) {
    dx = LayerNormBackward(d_hidden, c.final_xhat, c.final_rstd, params.final_ln_gamma,
                           grads.final_ln_gamma, grads.final_ln_beta);
  }
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const LayerParams& l = params.layers[li];
    LayerParams& gl = grads.layers[li];
    const LayerCache& lc = c.layers[li];

    // Feed-forward sublayer.
    Matrix df = dx;
    if (lc.ffn_drop.size()) df.array() *= lc.ffn_drop.array();
    gl.w_ff2.noalias() += lc.g.transpose() * df;
    gl.b_ff2.row(0) += df.colwise().sum();
    Matrix du = df * l.w_ff2.transpose();
    du.array() *= lc.u.unaryExpr([](double v) { return GeluGrad(v); }).array();
    gl.w_ff1.noalias() += lc.b.transpose() * du;
    gl.b_ff1.row(0) += du.colwise().sum();
    const Matrix db = du * l.w_ff1.transpose();
    dx += LayerNormBackward(db, lc.ln2_xhat, lc.ln2_rstd, l.ln2_gamma, gl.ln2_gamma, gl.ln2_beta);

    // Attention sublayer.
    Matrix dout = dx;
    if (lc.attn_drop.size()) dout.array() *= lc.attn_drop.array();
    gl.w_o.noalias() += lc.ctx.transpose() * dout;
    gl.b_o.row(0) += dout.colwise().sum();
    const Matrix dctx = dout * l.w_o.transpose();
    Matrix dq(dx.rows(), dx.cols()), dk(dx.rows(), dx.cols()), dv(dx.rows(), dx.cols());
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix& p = lc.probs[static_cast<std::size_t>(h)];
      const auto dctx_h = dctx.middleCols(h * d, d);
      const Matrix dp = dctx_h * lc.v.middleCols(h * d, d).transpose();
      dv.middleCols(h * d, d).noalias() = p.transpose() * dctx_h;
      Matrix ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
      ds *= scale;
      dq.middleCols(h * d, d).noalias() = ds * lc.k.middleCols(h * d, d);
      dk.middleCols(h * d, d).noalias() = ds.transpose() * lc.q.middleCols(h * d, d);
    }
    gl.w_q.noalias() += lc.a.transpose() * dq;
    gl.b_q.row(0) += dq.colwise().sum();
    gl.w_k.noalias() += lc.a.transpose() * dk;
    gl.b_k.row(0) += dk.colwise().sum();
    gl.w_v.noalias() += lc.a.transpose() * dv;
    gl.b_v.row(0) += dv.colwise().sum();
    Matrix da = dq * l.w_q.transpose();
    da.noalias() += dk * l.w_k.transpose();
    da.noalias() += dv * l.w_v.transpose();
    dx += LayerNormBackward(da, lc.ln1_xhat, lc.ln1_rstd, l.ln1_gamma, gl.ln1_gamma, gl.ln1_beta);
  }
  if (c.input_drop.size()) dx.array() *= c.input_drop.array();
  return dx;
}

RowVector IcLogits(const ModelParams& params, const RowVector& h_cls) {
  RowVector z = h_cls * params.ic_ff_w + params.ic_ff_b.row(0);
  z = z.array().tanh().matrix();
  return z * params.ic_w + params.ic_b.row(0);
}

Matrix SfLogits(const ModelParams& params, const Matrix& hidden,
                std::span<const std::int32_t> first_subtoken_index, Span word_region) {
  Matrix rows(static_cast<Eigen::Index>(first_subtoken_index.size()), hidden.cols());
  for (std::size_t i = 0; i < first_subtoken_index.size(); ++i) {
    const std::int32_t pos = first_subtoken_index[i];
    if (!word_region.contains(pos) || pos >= hidden.rows()) {
      throw Error(ErrorCode::kContract,
                  "slot-filling index " + std::to_string(pos) + " lies outside the word region");
    }
    rows.row(static_cast<Eigen::Index>(i)) = hidden.row(pos);
  }
  return Affine(rows, params.sf_w, params.sf_b);
}

Matrix LmLogits(const ModelParams& params, const Matrix& hidden,
                std::span<const std::int32_t> target_positions, std::int32_t lo, std::int32_t hi) {
  if (hi < 0) hi = static_cast<std::int32_t>(params.token_embedding.rows());
  Matrix rows(static_cast<Eigen::Index>(target_positions.size()), hidden.cols());
  for (std::size_t i = 0; i < target_positions.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = hidden.row(target_positions[i]);
  }
  Matrix logits = rows * params.token_embedding.middleRows(lo, hi - lo).transpose();
  logits.rowwise() += params.lm_bias.row(0).segment(lo, hi - lo);
  return logits;
}

RowVector WsaLogits(const ModelParams& params, const RowVector& h_cls) {
  return h_cls * params.wsa_w + params.wsa_b.row(0);
}

std::int32_t Argmax(const RowVector& logits) {
  std::int32_t best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = static_cast<std::int32_t>(i);
  }
  return best;
}

}  // namespace tpslu
