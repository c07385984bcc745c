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

#include "tpslu/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tpslu/error.hpp"

namespace tpslu {

using Json = nlohmann::ordered_json;

namespace {

[[noreturn]] void ConfigFail(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

// Reads fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const Json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      obj_ = doc.at(name_);
      if (!obj_.is_object()) ConfigFail("config section '" + name_ + "' must be an object");
    }
  }

  template <class T>
  void Get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      ConfigFail("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  bool Has(const char* key) const { return obj_.contains(key); }
  void Mark(const char* key) { seen_.insert(key); }

  void Finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) ConfigFail("unknown config key '" + name_ + "." + k + "'");
    }
  }

 private:
  std::string name_;
  Json obj_ = Json::object();
  std::set<std::string> seen_;
};

struct PresetDef {
  const char* name;
  MaskStrategy strategy;
  double word, phone, mix;
  bool wsa;
};

// NSP has no counterpart without sentence pairs; its slot is taken by WSA on
// the text layout, the closest pairwise classification objective.
const PresetDef kPresets[] = {
    {"+MLM 15%", MaskStrategy::kTextOnly, 15, 0, 0, false},
    {"+MLM 15%+NSP", MaskStrategy::kTextOnly, 15, 0, 0, true},
    {"+condMLM 100%+condMSM 100%(oneMod)", MaskStrategy::kOneMod, 100, 100, 0, false},
    {"+condMLM 30%+condMSM 30%(twoMod)", MaskStrategy::kTwoMod, 30, 30, 0, false},
    {"+condMLM 30%+condMSM 30%(twoMod)+WSA", MaskStrategy::kTwoMod, 30, 30, 0, true},
    {"+condMLM 100%+MLM 15%(oneMod)", MaskStrategy::kOneMod, 100, 0, 15, false},
    {"+condMSM 100%+MLM 15%(oneMod)", MaskStrategy::kOneMod, 0, 100, 15, false},
    {"+condMLM 100%+condMSM 100%+MLM 15%(oneMod)", MaskStrategy::kOneMod, 100, 100, 15, false},
};

const char* ModeName(FinetuneMode m) { return m == FinetuneMode::kJoint ? "joint" : "ic_only"; }
FinetuneMode ParseMode(const std::string& s) {
  if (s == "joint") return FinetuneMode::kJoint;
  if (s == "ic_only") return FinetuneMode::kIcOnly;
  ConfigFail("unknown fine-tuning mode '" + s + "'");
}
const char* LayoutName(FinetuneLayout l) { return l == FinetuneLayout::kConcat ? "concat" : "additive"; }
FinetuneLayout ParseLayout(const std::string& s) {
  if (s == "additive") return FinetuneLayout::kAdditive;
  if (s == "concat") return FinetuneLayout::kConcat;
  ConfigFail("unknown fine-tuning layout '" + s + "'");
}

Json ModelJson(const ModelConfig& m) {
  Json j;
  j["num_layers"] = m.num_layers;
  j["hidden_dim"] = m.hidden_dim;
  j["num_heads"] = m.num_heads;
  j["ffn_dim"] = m.ffn_dim;
  j["max_seq_len"] = m.max_seq_len;
  j["vocab_size"] = m.vocab_size;
  j["word_vocab_size"] = m.word_vocab_size;
  j["num_segments"] = m.num_segments;
  j["dropout"] = m.dropout;
  j["num_intents"] = m.num_intents;
  j["num_slot_tags"] = m.num_slot_tags;
  j["restrict_lm_support"] = m.restrict_lm_support;
  return j;
}

void ReadModel(Section& s, ModelConfig& m) {
  s.Get("num_layers", m.num_layers);
  s.Get("hidden_dim", m.hidden_dim);
  s.Get("num_heads", m.num_heads);
  s.Get("ffn_dim", m.ffn_dim);
  s.Get("max_seq_len", m.max_seq_len);
  s.Get("vocab_size", m.vocab_size);
  s.Get("word_vocab_size", m.word_vocab_size);
  s.Get("num_segments", m.num_segments);
  s.Get("dropout", m.dropout);
  s.Get("num_intents", m.num_intents);
  s.Get("num_slot_tags", m.num_slot_tags);
  s.Get("restrict_lm_support", m.restrict_lm_support);
  s.Finish();
}

void SetDotted(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) ConfigFail("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) ConfigFail("malformed override key: " + key);
    if (!node->is_object()) ConfigFail("override key does not name a section: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

}  // namespace

std::string RunConfig::PretrainCheckpointPath() const {
  return paths.pretrain_checkpoint.empty() ? paths.out_dir + "/pretrain.ckpt" : paths.pretrain_checkpoint;
}
std::string RunConfig::FinetuneCheckpointPath() const {
  return paths.finetune_checkpoint.empty() ? paths.out_dir + "/finetune.ckpt" : paths.finetune_checkpoint;
}
std::string RunConfig::ShardDir() const { return paths.out_dir + "/shards"; }

const std::vector<std::string>& PresetNames() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& p : kPresets) v.emplace_back(p.name);
    return v;
  }();
  return names;
}

MaskingConfig ApplyPreset(const std::string& name, MaskingConfig base) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      base.strategy = p.strategy;
      base.word_mask_pct = p.word;
      base.phone_mask_pct = p.phone;
      base.mlm_mix_pct = p.mix;
      base.wsa_enabled = p.wsa;
      return base;
    }
  }
  ConfigFail("unknown task preset '" + name + "'");
}

std::string RunConfigToJson(const RunConfig& c) {
  Json j;
  j["preset"] = c.preset;
  const MaskingConfig& m = c.masking;
  j["masking"] = {{"strategy", MaskStrategyName(m.strategy)},
                  {"word_mask_pct", m.word_mask_pct},
                  {"phone_mask_pct", m.phone_mask_pct},
                  {"mlm_mix_pct", m.mlm_mix_pct},
                  {"split", {{"mask", m.split.mask}, {"random", m.split.random}, {"keep", m.split.keep}}},
                  {"wsa_enabled", m.wsa_enabled},
                  {"wsa_negative_rate", m.wsa_negative_rate},
                  {"seed", m.seed}};
  j["model"] = ModelJson(c.model);
  const TrainConfig& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"max_steps", t.max_steps},
                {"finetune_steps", t.finetune_steps},
                {"pretrain_lr_grid", t.pretrain_lr_grid},
                {"finetune_lr_grid", t.finetune_lr_grid},
                {"warmup_fraction", t.warmup_fraction},
                {"max_grad_norm", t.max_grad_norm},
                {"eval_interval", t.eval_interval},
                {"seed", t.seed},
                {"deterministic", t.deterministic}};
  j["finetune"] = {{"mode", ModeName(c.finetune.mode)},
                   {"use_phone_embeddings", c.finetune.use_phone_embeddings},
                   {"beta_grid", c.finetune.beta_grid},
                   {"layout", LayoutName(c.finetune.layout)}};
  j["prepare"] = {{"dupe_factor", c.prepare.dupe_factor}};
  j["eval"] = {{"top_k", c.eval.top_k}, {"use_asr", c.eval.use_asr}, {"model_label", c.eval.model_label}};
  const PathsConfig& p = c.paths;
  j["paths"] = {{"dict", p.dict},
                {"vocab", p.vocab},
                {"corpus", p.corpus},
                {"slu_train", p.slu_train},
                {"slu_valid", p.slu_valid},
                {"slu_test", p.slu_test},
                {"asr_hyps", p.asr_hyps},
                {"mrr_refs", p.mrr_refs},
                {"mrr_hyps", p.mrr_hyps},
                {"out_dir", p.out_dir},
                {"pretrain_checkpoint", p.pretrain_checkpoint},
                {"finetune_checkpoint", p.finetune_checkpoint}};
  return j.dump(2) + "\n";
}

RunConfig RunConfigFromJson(const std::string& text, const std::vector<std::string>& overrides) {
  Json doc;
  try {
    doc = text.empty() ? Json::object() : Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) ConfigFail("config root must be an object");
  for (const auto& o : overrides) {
    // A preset chosen on the command line replaces the fields it governs.
    if (o.rfind("preset=", 0) == 0 && doc.contains("masking") && doc["masking"].is_object()) {
      for (const char* k : {"strategy", "word_mask_pct", "phone_mask_pct", "mlm_mix_pct", "wsa_enabled"}) {
        doc["masking"].erase(k);
      }
    }
    SetDotted(doc, o);
  }

  static const std::set<std::string> kSections = {"preset", "masking", "model", "train",
                                                  "finetune", "prepare", "eval", "paths"};
  for (const auto& [k, v] : doc.items()) {
    if (!kSections.count(k)) ConfigFail("unknown config section '" + k + "'");
  }

  RunConfig c;
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) ConfigFail("preset must be a string");
    c.preset = doc["preset"].get<std::string>();
    if (!c.preset.empty()) c.masking = ApplyPreset(c.preset, c.masking);
  }

  Section ms(doc, "masking");
  std::string strategy = MaskStrategyName(c.masking.strategy);
  ms.Get("strategy", strategy);
  try {
    c.masking.strategy = ParseMaskStrategy(strategy);
  } catch (const Error& e) {
    ConfigFail(e.what());
  }
  ms.Get("word_mask_pct", c.masking.word_mask_pct);
  ms.Get("phone_mask_pct", c.masking.phone_mask_pct);
  ms.Get("mlm_mix_pct", c.masking.mlm_mix_pct);
  ms.Get("wsa_enabled", c.masking.wsa_enabled);
  ms.Get("wsa_negative_rate", c.masking.wsa_negative_rate);
  ms.Get("seed", c.masking.seed);
  if (ms.Has("split")) {
    Section sp(doc.at("masking"), "split");
    sp.Get("mask", c.masking.split.mask);
    sp.Get("random", c.masking.split.random);
    sp.Get("keep", c.masking.split.keep);
    sp.Finish();
  }
  ms.Mark("split");
  ms.Finish();

  Section md(doc, "model");
  ReadModel(md, c.model);

  Section tr(doc, "train");
  tr.Get("batch_size", c.train.batch_size);
  tr.Get("max_steps", c.train.max_steps);
  tr.Get("finetune_steps", c.train.finetune_steps);
  tr.Get("pretrain_lr_grid", c.train.pretrain_lr_grid);
  tr.Get("finetune_lr_grid", c.train.finetune_lr_grid);
  tr.Get("warmup_fraction", c.train.warmup_fraction);
  tr.Get("max_grad_norm", c.train.max_grad_norm);
  tr.Get("eval_interval", c.train.eval_interval);
  tr.Get("seed", c.train.seed);
  tr.Get("deterministic", c.train.deterministic);
  tr.Finish();

  Section ft(doc, "finetune");
  std::string mode = ModeName(c.finetune.mode), layout = LayoutName(c.finetune.layout);
  ft.Get("mode", mode);
  ft.Get("layout", layout);
  c.finetune.mode = ParseMode(mode);
  c.finetune.layout = ParseLayout(layout);
  ft.Get("use_phone_embeddings", c.finetune.use_phone_embeddings);
  ft.Get("beta_grid", c.finetune.beta_grid);
  ft.Finish();

  Section pr(doc, "prepare");
  pr.Get("dupe_factor", c.prepare.dupe_factor);
  pr.Finish();

  Section ev(doc, "eval");
  ev.Get("top_k", c.eval.top_k);
  ev.Get("use_asr", c.eval.use_asr);
  ev.Get("model_label", c.eval.model_label);
  ev.Finish();

  Section pa(doc, "paths");
  pa.Get("dict", c.paths.dict);
  pa.Get("vocab", c.paths.vocab);
  pa.Get("corpus", c.paths.corpus);
  pa.Get("slu_train", c.paths.slu_train);
  pa.Get("slu_valid", c.paths.slu_valid);
  pa.Get("slu_test", c.paths.slu_test);
  pa.Get("asr_hyps", c.paths.asr_hyps);
  pa.Get("mrr_refs", c.paths.mrr_refs);
  pa.Get("mrr_hyps", c.paths.mrr_hyps);
  pa.Get("out_dir", c.paths.out_dir);
  pa.Get("pretrain_checkpoint", c.paths.pretrain_checkpoint);
  pa.Get("finetune_checkpoint", c.paths.finetune_checkpoint);
  pa.Finish();
  return c;
}

RunConfig LoadRunConfig(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return RunConfigFromJson(ss.str(), overrides);
}

void SaveRunConfig(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write config file: " + path);
  out << RunConfigToJson(cfg);
  if (!out) throw Error(ErrorCode::kIo, "failed writing config file: " + path);
}

void ValidateRunConfig(const RunConfig& cfg) {
  cfg.masking.Validate();
  cfg.train.Validate();
  ModelConfig m = cfg.model;
  if (m.vocab_size == 0 && m.word_vocab_size == 0) m.vocab_size = m.word_vocab_size = 1;
  m.Validate();
  if (cfg.prepare.dupe_factor <= 0) ConfigFail("prepare.dupe_factor must be positive");
  if (cfg.eval.top_k < 0) ConfigFail("eval.top_k must be non-negative");
  if (cfg.finetune.beta_grid.empty()) ConfigFail("finetune.beta_grid must be non-empty");
  for (double b : cfg.finetune.beta_grid) {
    if (!(b >= 0)) ConfigFail("finetune.beta_grid values must be non-negative");
  }
}

std::string ModelConfigToJson(const ModelConfig& cfg) { return ModelJson(cfg).dump(); }

ModelConfig ModelConfigFromJson(const std::string& text) {
  Json doc;
  try {
    doc = Json{{"model", Json::parse(text)}};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig m;
  Section s(doc, "model");
  ReadModel(s, m);
  return m;
}

}  // namespace tpslu
