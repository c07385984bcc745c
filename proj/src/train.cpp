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

#include "tpslu/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "tpslu/error.hpp"

namespace tpslu {

std::vector<std::pair<std::string, double>> LossBundle::Components() const {
  std::vector<std::pair<std::string, double>> out;
  auto add = [&](const char* name, const std::optional<double>& v) {
    if (v) out.emplace_back(name, *v);
  };
  add("condMLM", cond_mlm);
  add("condMSM", cond_msm);
  add("MLM", mlm);
  add("MSM", msm);
  add("WSA", wsa);
  add("IC", ic);
  add("SF", sf);
  return out;
}

double LossBundle::SumOfComponents() const {
  double s = 0.0;
  for (const auto& [name, v] : Components()) s += v;
  return s;
}

double MaskedCrossEntropy(const Matrix& logits, std::span<const std::int32_t> gold, Matrix* d_logits) {
  if (static_cast<Eigen::Index>(gold.size()) != logits.rows()) {
    throw Error(ErrorCode::kContract, "cross-entropy needs one logit row per target");
  }
  if (d_logits) d_logits->setZero(logits.rows(), logits.cols());
  if (gold.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(gold.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const std::int32_t g = gold[static_cast<std::size_t>(i)];
    if (g < 0 || g >= logits.cols()) throw Error(ErrorCode::kContract, "target outside logit range");
    const double mx = logits.row(i).maxCoeff();
    const RowVector e = (logits.row(i).array() - mx).exp().matrix();
    const double z = e.sum();
    loss += -(logits(i, g) - mx - std::log(z));
    if (d_logits) {
      d_logits->row(i) = e / z * inv_n;
      (*d_logits)(i, g) -= inv_n;
    }
  }
  return loss * inv_n;
}

double WsaLoss(const RowVector& logits, WsaLabel label, RowVector* d_logits) {
  if (logits.size() != 2) throw Error(ErrorCode::kContract, "WSA head must produce two logits");
  Matrix m = logits;
  const std::int32_t gold[] = {static_cast<std::int32_t>(label)};
  Matrix d;
  const double loss = MaskedCrossEntropy(m, gold, d_logits ? &d : nullptr);
  if (d_logits) *d_logits = d.row(0);
  return loss;
}

LossBundle CombinePretrainLosses(LossFlags flags, const TaskLosses& losses) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kContract, "loss flags and task losses disagree: " + msg);
  };
  const bool cond_w = flags & kLossCondMlm, plain_w = flags & kLossMlm;
  const bool cond_p = flags & kLossCondMsm, plain_p = flags & kLossMsm;
  if (cond_w && plain_w) fail("both condMLM and MLM set");
  if (cond_p && plain_p) fail("both condMSM and MSM set");
  if ((cond_w || plain_w) != losses.word_lm.has_value()) fail("masked-word loss");
  if ((cond_p || plain_p) != losses.phone_lm.has_value()) fail("masked-phone loss");
  if (static_cast<bool>(flags & kLossWsa) != losses.wsa.has_value()) fail("WSA loss");

  LossBundle b;
  if (cond_w) b.cond_mlm = losses.word_lm;
  if (plain_w) b.mlm = losses.word_lm;
  if (cond_p) b.cond_msm = losses.phone_lm;
  if (plain_p) b.msm = losses.phone_lm;
  b.wsa = losses.wsa;
  b.total = b.SumOfComponents();
  return b;
}

LossBundle CombinePretrainLosses(const PretrainExample& example, const TaskLosses& losses) {
  const auto& label = example.encoded.wsa_label;
  if (label == WsaLabel::kMatch && (example.loss_flags & (kLossMlm | kLossMsm))) {
    throw Error(ErrorCode::kContract, "matched pair carries unconditional losses");
  }
  if (label == WsaLabel::kMismatch && (example.loss_flags & (kLossCondMlm | kLossCondMsm))) {
    throw Error(ErrorCode::kContract, "mismatched pair carries conditional losses");
  }
  return CombinePretrainLosses(example.loss_flags, losses);
}

LossBundle FinetuneLoss(FinetuneMode mode, std::optional<double> ic, std::optional<double> sf) {
  if (!ic) throw Error(ErrorCode::kContract, "fine-tuning loss needs the IC component");
  if (mode == FinetuneMode::kJoint && !sf) {
    throw Error(ErrorCode::kContract, "joint fine-tuning needs the SF component");
  }
  if (mode == FinetuneMode::kIcOnly && sf) {
    throw Error(ErrorCode::kContract, "IC-only fine-tuning must not carry an SF component");
  }
  LossBundle b;
  b.ic = ic;
  b.sf = sf;
  b.total = b.SumOfComponents();
  return b;
}

TrainingExample FromPretrain(const PretrainExample& ex) {
  TrainingExample t;
  t.encoded = ex.encoded;
  t.loss_flags = ex.loss_flags;
  return t;
}

namespace {

struct LmTask {
  std::vector<std::int32_t> positions;
  std::vector<std::int32_t> gold;
};

LmTask CollectTargets(const std::map<std::int32_t, TokenId>& targets, std::int32_t lo,
                      std::int32_t hi) {
  LmTask t;
  for (const auto& [pos, id] : targets) {
    if (id < lo || id >= hi) {
      throw Error(ErrorCode::kContract, "masked target id " + std::to_string(id) +
                                            " outside the prediction support");
    }
    t.positions.push_back(pos);
    t.gold.push_back(id - lo);
  }
  return t;
}

}  // namespace

LossBundle ForwardBackward(const ModelParams& params, const TrainingExample& ex, ModelParams* grads,
                           bool train_mode, CounterRng* rng, double grad_scale) {
  const EncodedExample& e = ex.encoded;
  const ModelConfig& cfg = params.config;
  const bool augmented = !ex.word_phones.empty();
  const Matrix x0 = augmented ? EmbedInputWithPhones(params, e, ex.word_phones, ex.beta)
                              : EmbedInput(params, e);
  EncoderCache cache;
  const EncoderOutput out = Encode(params, x0, {}, train_mode, rng, grads ? &cache : nullptr);
  const Matrix& h = out.hidden;
  Matrix dh;
  if (grads) dh = Matrix::Zero(h.rows(), h.cols());

  auto lm = [&](const std::map<std::int32_t, TokenId>& targets, std::int32_t lo, std::int32_t hi) {
    const LmTask t = CollectTargets(targets, lo, hi);
    const Matrix logits = LmLogits(params, h, t.positions, lo, hi);
    Matrix dl;
    const double loss = MaskedCrossEntropy(logits, t.gold, grads ? &dl : nullptr);
    if (grads) {
      dl *= grad_scale;
      Matrix rows(static_cast<Eigen::Index>(t.positions.size()), h.cols());
      for (std::size_t i = 0; i < t.positions.size(); ++i) {
        rows.row(static_cast<Eigen::Index>(i)) = h.row(t.positions[i]);
      }
      grads->token_embedding.middleRows(lo, hi - lo).noalias() += dl.transpose() * rows;
      grads->lm_bias.row(0).segment(lo, hi - lo) += dl.colwise().sum();
      const Matrix drows = dl * params.token_embedding.middleRows(lo, hi - lo);
      for (std::size_t i = 0; i < t.positions.size(); ++i) {
        dh.row(t.positions[i]) += drows.row(static_cast<Eigen::Index>(i));
      }
    }
    return loss;
  };

  TaskLosses task;
  const std::int32_t vw = cfg.word_vocab_size;
  const std::int32_t v = cfg.vocab_size;
  if (!e.mlm_targets.empty()) task.word_lm = lm(e.mlm_targets, 0, cfg.restrict_lm_support ? vw : v);
  if (!e.msm_targets.empty()) task.phone_lm = lm(e.msm_targets, cfg.restrict_lm_support ? vw : 0, v);

  const RowVector h_cls = h.row(0);
  if (e.wsa_label) {
    RowVector dl;
    task.wsa = WsaLoss(WsaLogits(params, h_cls), *e.wsa_label, grads ? &dl : nullptr);
    if (grads) {
      dl *= grad_scale;
      grads->wsa_w.noalias() += h_cls.transpose() * dl;
      grads->wsa_b.row(0) += dl;
      dh.row(0) += dl * params.wsa_w.transpose();
    }
  }

  LossBundle bundle;
  if (ex.loss_flags || task.word_lm || task.phone_lm || task.wsa) {
    bundle = CombinePretrainLosses(ex.loss_flags, task);
  }

  if (ex.intent) {
    if (*ex.intent < 0 || *ex.intent >= cfg.num_intents) {
      throw Error(ErrorCode::kContract, "intent label outside the IC head");
    }
    const RowVector z = h_cls * params.ic_ff_w + params.ic_ff_b.row(0);
    const RowVector a = z.array().tanh().matrix();
    Matrix logits = a * params.ic_w + params.ic_b.row(0);
    const std::int32_t gold[] = {*ex.intent};
    Matrix dl;
    bundle.ic = MaskedCrossEntropy(logits, gold, grads ? &dl : nullptr);
    if (grads) {
      dl *= grad_scale;
      grads->ic_w.noalias() += a.transpose() * dl;
      grads->ic_b += dl;
      RowVector dz = dl * params.ic_w.transpose();
      dz.array() *= 1.0 - a.array().square();
      grads->ic_ff_w.noalias() += h_cls.transpose() * dz;
      grads->ic_ff_b.row(0) += dz;
      dh.row(0) += dz * params.ic_ff_w.transpose();
    }
  }

  if (!ex.slot_tags.empty()) {
    if (ex.slot_tags.size() > e.word_spans.size()) {
      throw Error(ErrorCode::kContract, "more slot tags than encoded words");
    }
    std::vector<std::int32_t> first;
    for (std::size_t i = 0; i < ex.slot_tags.size(); ++i) first.push_back(e.word_spans[i].begin);
    const Matrix logits = SfLogits(params, h, first, e.word_region);
    Matrix dl;
    bundle.sf = MaskedCrossEntropy(logits, ex.slot_tags, grads ? &dl : nullptr);
    if (grads) {
      dl *= grad_scale;
      for (std::size_t i = 0; i < first.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        grads->sf_w.noalias() += h.row(first[i]).transpose() * dl.row(r);
        dh.row(first[i]) += dl.row(r) * params.sf_w.transpose();
      }
      grads->sf_b.row(0) += dl.colwise().sum();
    }
  }

  bundle.total = bundle.SumOfComponents();
  if (grads) {
    const Matrix dx0 = EncodeBackward(params, cache, dh, *grads);
    EmbedBackward(e, ex.word_phones, augmented ? ex.beta : 0.0, dx0, *grads);
  }
  return bundle;
}

void AdamUpdate(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t t, double lr,
                const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

namespace {

std::vector<Matrix*> Tensors(ModelParams& p) {
  std::vector<Matrix*> out;
  p.ForEach([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

AdamOptimizer::AdamOptimizer(const ModelParams& like, AdamConfig cfg)
    : cfg_(cfg), m_(ModelParams::ZerosLike(like)), v_(ModelParams::ZerosLike(like)) {}

void AdamOptimizer::Step(ModelParams& params, const ModelParams& grads, double lr) {
  grads.ForEach([](const std::string& name, const Matrix& g) {
    if (!g.allFinite()) throw Error(ErrorCode::kNumeric, "non-finite gradient in tensor " + name);
  });
  auto p = Tensors(params);
  auto g = Tensors(const_cast<ModelParams&>(grads));
  auto m = Tensors(m_);
  auto v = Tensors(v_);
  if (p.size() != g.size() || p.size() != m.size()) {
    throw Error(ErrorCode::kContract, "optimizer state does not match the parameters");
  }
  ++step_;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->rows() != g[i]->rows() || p[i]->cols() != g[i]->cols() ||
        p[i]->rows() != m[i]->rows() || p[i]->cols() != m[i]->cols()) {
      throw Error(ErrorCode::kContract, "optimizer tensor shape mismatch");
    }
    AdamUpdate(*p[i], *g[i], *m[i], *v[i], step_, lr, cfg_);
  }
}

double LrSchedule::At(std::int64_t step) const {
  const auto warm = static_cast<std::int64_t>(std::llround(warmup_fraction * static_cast<double>(max_steps)));
  if (step >= max_steps) return 0.0;
  if (warm > 0 && step < warm) return peak * static_cast<double>(step) / static_cast<double>(warm);
  return peak * static_cast<double>(max_steps - step) / static_cast<double>(max_steps - warm);
}

double ClipGradNorm(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  grads.ForEach([&](const std::string&, const Matrix& g) { sq += g.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    grads.ForEach([&](const std::string&, Matrix& g) { g *= s; });
  }
  return norm;
}

std::vector<NamedTensor> NamedTensors(ModelParams& params, const ModelParams& grads) {
  std::vector<const Matrix*> g;
  grads.ForEach([&](const std::string&, const Matrix& m) { g.push_back(&m); });
  std::vector<NamedTensor> out;
  std::size_t i = 0;
  params.ForEach([&](const std::string& name, Matrix& m) { out.push_back({name, &m, g[i++]}); });
  return out;
}

GradCheckReport GradCheck(std::span<const NamedTensor> tensors, const std::function<double()>& loss,
                          const GradCheckOptions& options) {
  GradCheckReport report;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    const NamedTensor& t = tensors[ti];
    TensorCheck check;
    check.name = t.name;
    const Eigen::Index n = t.value->size();
    if (n == 0) {
      report.tensors.push_back(check);
      continue;
    }
    std::vector<Eigen::Index> coords;
    if (n <= options.coords_per_tensor) {
      for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      // Half on coordinates with a non-zero analytic gradient, half uniform.
      CounterRng rng(options.seed, ti);
      std::vector<Eigen::Index> active;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (t.analytic_grad->data()[i] != 0.0) active.push_back(i);
      }
      const std::int32_t half = options.coords_per_tensor / 2;
      for (std::int32_t k = 0; k < half && !active.empty(); ++k) {
        coords.push_back(active[rng.UniformInt(active.size())]);
      }
      while (static_cast<std::int32_t>(coords.size()) < options.coords_per_tensor) {
        coords.push_back(static_cast<Eigen::Index>(rng.UniformInt(static_cast<std::uint64_t>(n))));
      }
    }
    for (Eigen::Index c : coords) {
      double& x = t.value->data()[c];
      const double orig = x;
      x = orig + options.epsilon;
      const double up = loss();
      x = orig - options.epsilon;
      const double down = loss();
      x = orig;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = t.analytic_grad->data()[c];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), options.abs_floor});
      const double rel = std::abs(numeric - analytic) / denom;
      check.max_rel_error = std::max(check.max_rel_error, rel);
      ++check.coords_checked;
    }
    check.pass = check.max_rel_error <= options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.pass = report.pass && check.pass;
    report.tensors.push_back(check);
  }
  return report;
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, "train config: " + msg); };
  if (batch_size <= 0) fail("batch_size must be positive");
  if (max_steps <= 0 || finetune_steps <= 0) fail("step counts must be positive");
  if (pretrain_lr_grid.empty() || finetune_lr_grid.empty()) fail("learning-rate grids must be non-empty");
  for (double lr : pretrain_lr_grid) if (!(lr > 0)) fail("learning rates must be positive");
  for (double lr : finetune_lr_grid) if (!(lr > 0)) fail("learning rates must be positive");
  if (warmup_fraction < 0 || warmup_fraction >= 1) fail("warmup_fraction must lie in [0, 1)");
  if (eval_interval <= 0) fail("eval_interval must be positive");
}

std::string LossLogLine(const LossLogRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step;
  j["lr"] = record.lr;
  for (const auto& [name, v] : record.components) j[name] = v;
  j["total"] = record.total;
  return j.dump();
}

namespace {

// Fixed-seed epoch shuffler.
class BatchOrder {
 public:
  BatchOrder(std::size_t n, CounterRng rng) : n_(n), rng_(rng) { Reshuffle(); }
  std::size_t Next() {
    if (cursor_ == order_.size()) Reshuffle();
    return order_[cursor_++];
  }

 private:
  void Reshuffle() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    for (std::size_t i = n_; i > 1; --i) {
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_.UniformInt(i))]);
    }
    cursor_ = 0;
  }

  std::size_t n_;
  CounterRng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

class BatchAccumulator {
 public:
  void Add(const LossBundle& b) {
    for (const auto& [name, v] : b.Components()) {
      auto it = std::find_if(sums_.begin(), sums_.end(), [&](const auto& e) { return e.first == name; });
      if (it == sums_.end()) {
        sums_.push_back({name, {v, 1}});
      } else {
        it->second.first += v;
        it->second.second += 1;
      }
    }
    total_ += b.total;
    ++count_;
  }
  LossLogRecord Record(std::int64_t step, double lr) const {
    static const char* const kOrder[] = {"condMLM", "condMSM", "MLM", "MSM", "WSA", "IC", "SF"};
    LossLogRecord r;
    r.step = step;
    r.lr = lr;
    for (const char* name : kOrder) {
      for (const auto& [n, sc] : sums_) {
        if (n == name) r.components.emplace_back(n, sc.first / sc.second);
      }
    }
    r.total = count_ ? total_ / count_ : 0.0;
    return r;
  }

 private:
  std::vector<std::pair<std::string, std::pair<double, int>>> sums_;
  double total_ = 0.0;
  int count_ = 0;
};

// Stream ids for the components of a training run.
enum Stream : std::uint64_t {
  kInitStream = 1,
  kOrderStream = 2,
  kDropoutStream = 3,
  kHeadStream = 4,
};

double FinalWindowLoss(const std::vector<LossLogRecord>& log) {
  const std::size_t window = std::max<std::size_t>(1, log.size() / 10);
  double s = 0.0;
  for (std::size_t i = log.size() - window; i < log.size(); ++i) s += log[i].total;
  return s / static_cast<double>(window);
}

}  // namespace

PretrainResult Pretrain(std::span<const PretrainExample> examples, const ModelConfig& model_config,
                        const TrainConfig& tc, const ModelParams* init) {
  tc.Validate();
  model_config.Validate();
  if (examples.empty()) throw Error(ErrorCode::kInvalidArgument, "no pre-training examples");
  std::vector<TrainingExample> data;
  data.reserve(examples.size());
  for (const auto& ex : examples) data.push_back(FromPretrain(ex));

  std::optional<PretrainResult> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (double peak : tc.pretrain_lr_grid) {
    const CounterRng root(tc.seed);
    CounterRng init_rng = root.Split(kInitStream);
    PretrainResult run;
    run.params = init ? *init : ModelParams::Initialize(model_config, init_rng);
    run.learning_rate = peak;
    AdamOptimizer opt(run.params);
    ModelParams grads = ModelParams::ZerosLike(run.params);
    BatchOrder order(data.size(), root.Split(kOrderStream));
    const CounterRng dropout_root = root.Split(kDropoutStream);
    const LrSchedule schedule{peak, tc.warmup_fraction, tc.max_steps};
    const double scale = 1.0 / tc.batch_size;
    for (std::int64_t step = 0; step < tc.max_steps; ++step) {
      grads.SetZero();
      BatchAccumulator acc;
      for (std::int32_t b = 0; b < tc.batch_size; ++b) {
        CounterRng rng = dropout_root.Split(static_cast<std::uint64_t>(step * tc.batch_size + b));
        acc.Add(ForwardBackward(run.params, data[order.Next()], &grads, true, &rng, scale));
      }
      ClipGradNorm(grads, tc.max_grad_norm);
      const double lr = schedule.At(step);
      opt.Step(run.params, grads, lr);
      run.log.push_back(acc.Record(step, lr));
    }
    if (!run.params.AllFinite()) throw Error(ErrorCode::kNumeric, "parameters diverged during pre-training");
    const double score = FinalWindowLoss(run.log);
    if (!best || score < best_score) {
      best_score = score;
      best = std::move(run);
    }
  }
  return std::move(*best);
}

double MeanPretrainLoss(const ModelParams& params, std::span<const PretrainExample> examples) {
  if (examples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& ex : examples) {
    s += ForwardBackward(params, FromPretrain(ex), nullptr, false, nullptr).total;
  }
  return s / static_cast<double>(examples.size());
}

SluEncoder::SluEncoder(const Lexicon& lexicon, const Vocab& vocab, std::int32_t max_seq_len,
                       FinetuneLayout layout)
    : lexicon_(lexicon),
      vocab_(vocab),
      joint_(vocab, lexicon.phone_vocab()),
      max_seq_len_(max_seq_len),
      layout_(layout) {}

std::vector<std::string> SluEncoder::Words(const std::string& text) const {
  return SplitWhitespace(ToLower(text));
}

TrainingExample SluEncoder::Encode(const std::string& text, bool with_phones, double beta) const {
  TrainingExample t;
  const PairedUtterance u = BuildPaired(lexicon_, vocab_, text);
  if (layout_ == FinetuneLayout::kConcat) {
    t.encoded = EncodePair(u, joint_, max_seq_len_);
    return t;
  }
  t.encoded = EncodeText(u, max_seq_len_);
  if (with_phones) {
    t.beta = beta;
    for (std::size_t w = 0; w < t.encoded.word_spans.size(); ++w) {
      const Span& s = u.word_phone_spans[w];
      std::vector<TokenId> ids;
      for (std::int32_t i = s.begin; i < s.end; ++i) {
        ids.push_back(joint_.FromPhone(u.phones[static_cast<std::size_t>(i)]));
      }
      t.word_phones.push_back(std::move(ids));
    }
  }
  return t;
}

TrainingExample SluEncoder::EncodeLabeled(const SluExample& ex, const SluLabels& labels,
                                          FinetuneMode mode, bool with_phones, double beta) const {
  TrainingExample t = Encode(ex.text, with_phones, beta);
  t.intent = labels.intents.Id(ex.frame.intent);
  if (mode == FinetuneMode::kJoint) {
    const std::size_t n = std::min(ex.tags.size(), t.encoded.word_spans.size());
    for (std::size_t i = 0; i < n; ++i) t.slot_tags.push_back(labels.tags.Id(ex.tags[i]));
  }
  return t;
}

SluPrediction Predict(const ModelParams& params, const TrainingExample& ex) {
  const bool augmented = !ex.word_phones.empty();
  const Matrix x0 = augmented ? EmbedInputWithPhones(params, ex.encoded, ex.word_phones, ex.beta)
                              : EmbedInput(params, ex.encoded);
  const EncoderOutput out = Encode(params, x0, {}, false, nullptr);
  SluPrediction p;
  p.intent = Argmax(IcLogits(params, out.cls()));
  if (params.config.num_slot_tags > 0) {
    std::vector<std::int32_t> first;
    for (const auto& s : ex.encoded.word_spans) first.push_back(s.begin);
    const Matrix logits = SfLogits(params, out.hidden, first, ex.encoded.word_region);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) p.tags.push_back(Argmax(logits.row(i)));
  }
  return p;
}

double EvaluateIntentAccuracy(const ModelParams& params, const SluEncoder& encoder,
                              const SluLabels& labels, const std::vector<SluExample>& data,
                              bool with_phones, double beta) {
  if (data.empty()) return 0.0;
  std::int64_t correct = 0;
  for (const auto& ex : data) {
    const SluPrediction p = Predict(params, encoder.Encode(ex.text, with_phones, beta));
    if (labels.intents.Label(p.intent) == ex.frame.intent) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

FinetuneResult Finetune(const ModelParams& init, const Lexicon& lexicon, const Vocab& vocab,
                        const std::vector<SluExample>& train, const std::vector<SluExample>& valid,
                        const FinetuneOptions& options, const TrainConfig& tc) {
  tc.Validate();
  if (train.empty()) throw Error(ErrorCode::kInvalidArgument, "empty SLU training set");
  const SluLabels labels = SluLabels::FromTraining(train);
  for (const auto& ex : valid) {
    if (!labels.intents.Find(ex.frame.intent)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "validation intent not seen in training: " + ex.frame.intent);
    }
    if (options.mode == FinetuneMode::kJoint) {
      for (const auto& t : ex.tags) {
        if (!labels.tags.Find(t)) {
          throw Error(ErrorCode::kInvalidArgument, "validation slot tag not seen in training: " + t);
        }
      }
    }
  }
  const bool with_phones =
      options.use_phone_embeddings && options.layout == FinetuneLayout::kAdditive;
  std::vector<double> betas = with_phones ? options.beta_grid : std::vector<double>{0.0};
  if (betas.empty()) throw Error(ErrorCode::kConfig, "beta grid must be non-empty");
  for (double b : betas) {
    if (b < 0) throw Error(ErrorCode::kConfig, "beta must be non-negative");
  }

  const SluEncoder encoder(lexicon, vocab, init.config.max_seq_len, options.layout);
  std::optional<FinetuneResult> best;
  std::vector<FinetuneRun> sweep;
  for (double peak : tc.finetune_lr_grid) {
    for (double beta : betas) {
      const CounterRng root(tc.seed);
      CounterRng head_rng = root.Split(kHeadStream);
      ModelParams params = init;
      params.ResetHeads(labels.intents.size(), labels.tags.size(), head_rng);

      std::vector<TrainingExample> data;
      data.reserve(train.size());
      for (const auto& ex : train) {
        data.push_back(encoder.EncodeLabeled(ex, labels, options.mode, with_phones, beta));
      }

      AdamOptimizer opt(params);
      ModelParams grads = ModelParams::ZerosLike(params);
      BatchOrder order(data.size(), root.Split(kOrderStream));
      const CounterRng dropout_root = root.Split(kDropoutStream);
      const LrSchedule schedule{peak, tc.warmup_fraction, tc.finetune_steps};
      const double scale = 1.0 / tc.batch_size;

      FinetuneResult run;
      run.labels = labels;
      run.beta = beta;
      run.learning_rate = peak;
      run.valid_icacc = -1.0;
      std::int64_t best_step = 0;
      for (std::int64_t step = 0; step < tc.finetune_steps; ++step) {
        grads.SetZero();
        BatchAccumulator acc;
        for (std::int32_t b = 0; b < tc.batch_size; ++b) {
          CounterRng rng = dropout_root.Split(static_cast<std::uint64_t>(step * tc.batch_size + b));
          acc.Add(ForwardBackward(params, data[order.Next()], &grads, true, &rng, scale));
        }
        ClipGradNorm(grads, tc.max_grad_norm);
        const double lr = schedule.At(step);
        opt.Step(params, grads, lr);
        run.log.push_back(acc.Record(step, lr));
        const bool last = step + 1 == tc.finetune_steps;
        if ((step + 1) % tc.eval_interval == 0 || last) {
          const std::vector<SluExample>& held = valid.empty() ? train : valid;
          const double acc_valid =
              EvaluateIntentAccuracy(params, encoder, labels, held, with_phones, beta);
          if (acc_valid > run.valid_icacc) {
            run.valid_icacc = acc_valid;
            run.params = params;
            best_step = step + 1;
          }
        }
      }
      sweep.push_back({peak, beta, run.valid_icacc, best_step});
      if (!best || run.valid_icacc > best->valid_icacc) best = std::move(run);
    }
  }
  best->sweep = std::move(sweep);
  return std::move(*best);
}

}  // namespace tpslu
