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

#include "tpslu/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tpslu/checkpoint.hpp"
#include "tpslu/error.hpp"
#include "tpslu/lexicon.hpp"
#include "tpslu/pretraindata.hpp"
#include "tpslu/textproc.hpp"
#include "tpslu/train.hpp"

namespace tpslu {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write file: " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing file: " + path);
}

namespace {

constexpr std::size_t kExamplesPerShard = 10000;

void RequirePath(const std::string& path, const char* key) {
  if (path.empty()) throw Error(ErrorCode::kConfig, std::string("paths.") + key + " is not set");
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kIo, std::string("input for paths.") + key + " not found: " + path);
  }
}

void Begin(const RunConfig& cfg, const char* command) {
  ValidateRunConfig(cfg);
  fs::create_directories(cfg.paths.out_dir);
  SaveRunConfig(cfg.paths.out_dir + "/" + command + "_config.json", cfg);
}

std::string OutPath(const RunConfig& cfg, const std::string& name) { return cfg.paths.out_dir + "/" + name; }

void WriteLossLog(const std::string& path, const std::vector<LossLogRecord>& log) {
  std::string text;
  for (const auto& r : log) text += LossLogLine(r) + "\n";
  WriteText(path, text);
}

ModelConfig DeriveModelConfig(const RunConfig& cfg, const JointIndex& joint) {
  ModelConfig m = cfg.model;
  if ((m.vocab_size != 0 && m.vocab_size != joint.total()) ||
      (m.word_vocab_size != 0 && m.word_vocab_size != joint.word_vocab_size)) {
    throw Error(ErrorCode::kConfig, "model vocabulary sizes disagree with the vocabulary and lexicon");
  }
  m.vocab_size = joint.total();
  m.word_vocab_size = joint.word_vocab_size;
  m.Validate();
  return m;
}

std::vector<PairedUtterance> LoadCorpus(const std::string& path, const Lexicon& lex, const Vocab& vocab) {
  std::vector<PairedUtterance> corpus;
  for (const auto& line : ReadLines(path)) {
    if (SplitWhitespace(line).empty()) continue;
    corpus.push_back(BuildPaired(lex, vocab, line));
  }
  if (corpus.empty()) throw Error(ErrorCode::kInvalidArgument, "pre-training corpus is empty: " + path);
  return corpus;
}

std::vector<std::string> ShardFiles(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("shard-", 0) == 0 && e.path().extension() == ".bin") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Json PrepareStats(const std::vector<PretrainExample>& examples, const JointIndex& joint) {
  std::map<std::string, std::int64_t> flag_counts;
  std::int64_t word_tokens = 0, word_targets = 0, phone_tokens = 0, phone_targets = 0;
  std::int64_t masked = 0, randomized = 0, kept = 0, positives = 0, negatives = 0;
  const TokenId phone_mask = joint.FromPhone(PhoneVocab::kMask);
  for (const auto& ex : examples) {
    const EncodedExample& e = ex.encoded;
    ++flag_counts[LossFlagsToString(ex.loss_flags)];
    word_tokens += e.word_region.size();
    phone_tokens += e.phone_region.size();
    word_targets += static_cast<std::int64_t>(e.mlm_targets.size());
    phone_targets += static_cast<std::int64_t>(e.msm_targets.size());
    auto tally = [&](const std::map<std::int32_t, TokenId>& targets, TokenId mask_id) {
      for (const auto& [pos, gold] : targets) {
        const TokenId in = e.input_ids[static_cast<std::size_t>(pos)];
        if (in == mask_id) {
          ++masked;
        } else if (in == gold) {
          ++kept;
        } else {
          ++randomized;
        }
      }
    };
    tally(e.mlm_targets, Vocab::kMask);
    tally(e.msm_targets, phone_mask);
    if (e.wsa_label) (*e.wsa_label == WsaLabel::kMatch ? positives : negatives)++;
  }
  auto ratio = [](std::int64_t a, std::int64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
  const std::int64_t targets = masked + randomized + kept;
  Json j;
  j["examples"] = examples.size();
  j["loss_flags"] = flag_counts;
  j["word_tokens"] = word_tokens;
  j["word_targets"] = word_targets;
  j["word_target_rate"] = ratio(word_targets, word_tokens);
  j["phone_tokens"] = phone_tokens;
  j["phone_targets"] = phone_targets;
  j["phone_target_rate"] = ratio(phone_targets, phone_tokens);
  j["substitution"] = {{"mask", ratio(masked, targets)},
                       {"random", ratio(randomized, targets)},
                       {"keep", ratio(kept, targets)}};
  j["wsa"] = {{"match", positives}, {"mismatch", negatives}};
  return j;
}

struct FinetuneMeta {
  FinetuneOptions options;
  double beta = 0.0;
};

std::string MetaPath(const std::string& ckpt) { return ckpt + ".meta.json"; }
std::string LabelsPath(const std::string& ckpt) { return ckpt + ".labels.json"; }

FinetuneMeta LoadMeta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open fine-tuning metadata: " + path);
  try {
    const Json j = Json::parse(in);
    // Reuse the config parser for the option block.
    const RunConfig c = RunConfigFromJson(Json{{"finetune", j.at("finetune")}}.dump());
    FinetuneMeta m;
    m.options = c.finetune;
    m.beta = j.at("beta").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("bad fine-tuning metadata: ") + e.what());
  }
}

Json FinetuneBlock(const RunConfig& cfg) {
  return Json::parse(RunConfigToJson(cfg)).at("finetune");
}

void PrepareInto(const RunConfig& cfg, const Lexicon& lex, const Vocab& vocab) {
  const JointIndex joint(vocab, lex.phone_vocab());
  const ModelConfig model = DeriveModelConfig(cfg, joint);
  const std::vector<PairedUtterance> corpus = LoadCorpus(cfg.paths.corpus, lex, vocab);

  std::vector<PretrainExample> examples;
  examples.reserve(corpus.size() * static_cast<std::size_t>(cfg.prepare.dupe_factor));
  for (std::int32_t pass = 0; pass < cfg.prepare.dupe_factor; ++pass) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const std::uint64_t stream = static_cast<std::uint64_t>(pass) * corpus.size() + i;
      examples.push_back(MakePretrainExample(corpus, i, stream, cfg.masking, joint, model.max_seq_len));
    }
  }

  const std::string dir = cfg.ShardDir();
  fs::create_directories(dir);
  for (const auto& old : ShardFiles(dir)) fs::remove(old);
  std::size_t shards = 0;
  for (std::size_t start = 0; start < examples.size(); start += kExamplesPerShard, ++shards) {
    const std::size_t end = std::min(examples.size(), start + kExamplesPerShard);
    char name[32];
    std::snprintf(name, sizeof name, "/shard-%05zu.bin", shards);
    WriteShard(dir + name, std::span(examples).subspan(start, end - start));
  }

  Json report;
  report["utterances"] = corpus.size();
  report["shards"] = shards;
  report.update(PrepareStats(examples, joint));
  WriteText(OutPath(cfg, "prepare_report.json"), report.dump(2) + "\n");
}

}  // namespace

void CmdBuildLexicon(const RunConfig& cfg) {
  RequirePath(cfg.paths.dict, "dict");
  if (!cfg.paths.corpus.empty()) RequirePath(cfg.paths.corpus, "corpus");
  Begin(cfg, "build_lexicon");
  const Lexicon lex = Lexicon::Load(cfg.paths.dict);
  lex.phone_vocab().Save(OutPath(cfg, "phones.txt"));
  Json stats;
  stats["entries"] = lex.size();
  stats["phones"] = lex.phone_vocab().size();
  if (!cfg.paths.corpus.empty()) {
    std::ifstream in(cfg.paths.corpus, std::ios::binary);
    const UnkStats u = lex.MeasureUnkRate(in);
    stats["probe_tokens"] = u.total_tokens;
    stats["probe_unk_tokens"] = u.unk_tokens;
    stats["probe_unk_rate"] = u.unk_rate();
  }
  WriteText(OutPath(cfg, "lexicon_stats.json"), stats.dump(2) + "\n");
}

void CmdPrepare(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  RequirePath(cfg.paths.dict, "dict");
  RequirePath(cfg.paths.vocab, "vocab");
  RequirePath(cfg.paths.corpus, "corpus");
  Begin(cfg, "prepare");
  const Lexicon lex = Lexicon::Load(cfg.paths.dict);
  const Vocab vocab = Vocab::Load(cfg.paths.vocab);
  PrepareInto(cfg, lex, vocab);
}

void CmdPretrain(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  RequirePath(cfg.paths.dict, "dict");
  RequirePath(cfg.paths.vocab, "vocab");
  Begin(cfg, "pretrain");
  const Lexicon lex = Lexicon::Load(cfg.paths.dict);
  const Vocab vocab = Vocab::Load(cfg.paths.vocab);
  const ModelConfig model = DeriveModelConfig(cfg, JointIndex(vocab, lex.phone_vocab()));

  if (ShardFiles(cfg.ShardDir()).empty()) {
    RequirePath(cfg.paths.corpus, "corpus");
    PrepareInto(cfg, lex, vocab);
  }
  std::vector<PretrainExample> examples;
  for (const auto& f : ShardFiles(cfg.ShardDir())) {
    auto part = ReadShard(f);
    examples.insert(examples.end(), std::make_move_iterator(part.begin()),
                    std::make_move_iterator(part.end()));
  }
  const PretrainResult result = Pretrain(examples, model, cfg.train);

  fs::path ckpt(cfg.PretrainCheckpointPath());
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  SaveCheckpoint(ckpt.string(), result.params);
  WriteLossLog(OutPath(cfg, "pretrain_loss.jsonl"), result.log);
  Json report;
  report["examples"] = examples.size();
  report["steps"] = result.log.size();
  report["learning_rate"] = result.learning_rate;
  report["initial_loss"] = result.log.front().total;
  report["final_loss"] = result.log.back().total;
  report["parameters"] = result.params.NumParameters();
  WriteText(OutPath(cfg, "pretrain_report.json"), report.dump(2) + "\n");
}

void CmdFinetune(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  RequirePath(cfg.paths.dict, "dict");
  RequirePath(cfg.paths.vocab, "vocab");
  RequirePath(cfg.paths.slu_train, "slu_train");
  if (!cfg.paths.slu_valid.empty()) RequirePath(cfg.paths.slu_valid, "slu_valid");
  RequirePath(cfg.PretrainCheckpointPath(), "pretrain_checkpoint");
  Begin(cfg, "finetune");
  const Lexicon lex = Lexicon::Load(cfg.paths.dict);
  const Vocab vocab = Vocab::Load(cfg.paths.vocab);
  const ModelParams init = LoadCheckpoint(cfg.PretrainCheckpointPath());
  const JointIndex joint(vocab, lex.phone_vocab());
  if (init.config.vocab_size != joint.total() || init.config.word_vocab_size != joint.word_vocab_size) {
    throw Error(ErrorCode::kConfig, "pre-training checkpoint does not match the vocabulary and lexicon");
  }
  const auto train = LoadSluJsonl(cfg.paths.slu_train);
  const auto valid = cfg.paths.slu_valid.empty() ? std::vector<SluExample>{} : LoadSluJsonl(cfg.paths.slu_valid);
  const FinetuneResult r = Finetune(init, lex, vocab, train, valid, cfg.finetune, cfg.train);

  const std::string ckpt = cfg.FinetuneCheckpointPath();
  if (fs::path(ckpt).has_parent_path()) fs::create_directories(fs::path(ckpt).parent_path());
  SaveCheckpoint(ckpt, r.params);
  r.labels.Save(LabelsPath(ckpt));
  Json meta;
  meta["finetune"] = FinetuneBlock(cfg);
  meta["beta"] = r.beta;
  meta["learning_rate"] = r.learning_rate;
  meta["valid_icacc"] = r.valid_icacc;
  WriteText(MetaPath(ckpt), meta.dump(2) + "\n");

  WriteLossLog(OutPath(cfg, "finetune_loss.jsonl"), r.log);
  Json report = meta;
  report["sweep"] = Json::array();
  for (const auto& run : r.sweep) {
    report["sweep"].push_back({{"learning_rate", run.learning_rate},
                               {"beta", run.beta},
                               {"valid_icacc", run.valid_icacc},
                               {"best_step", run.best_step}});
  }
  WriteText(OutPath(cfg, "finetune_report.json"), report.dump(2) + "\n");
}

MetricReport EvaluateTestSet(const RunConfig& cfg, const FramePredictor& predict) {
  RequirePath(cfg.paths.slu_test, "slu_test");
  const auto test = LoadSluJsonl(cfg.paths.slu_test);
  if (test.empty()) throw Error(ErrorCode::kInvalidArgument, "SLU test set is empty");
  const bool asr = cfg.eval.use_asr && !cfg.paths.asr_hyps.empty();
  std::vector<std::string> refs, inputs;
  for (const auto& ex : test) refs.push_back(ex.text);
  if (asr) {
    RequirePath(cfg.paths.asr_hyps, "asr_hyps");
    inputs = ReadLines(cfg.paths.asr_hyps);
    if (inputs.size() != test.size()) {
      throw Error(ErrorCode::kInvalidArgument, "asr_hyps has " + std::to_string(inputs.size()) +
                                                   " lines for " + std::to_string(test.size()) +
                                                   " test examples");
    }
  } else {
    inputs = refs;
  }

  std::vector<std::string> predicted, gold;
  SemErCounts counts;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const FramePrediction p = predict(inputs[i], i);
    predicted.push_back(p.intent);
    gold.push_back(test[i].frame.intent);
    counts += SemerCounts(test[i].frame, SemanticFrame{p.intent, p.slots});
  }
  MetricReport report;
  report.model_label = cfg.eval.model_label;
  report.icacc = IntentAccuracy(predicted, gold);
  report.semer = counts;
  if (asr) {
    RequirePath(cfg.paths.vocab, "vocab");
    const Vocab vocab = Vocab::Load(cfg.paths.vocab);
    report.confusion_pairs =
        ExtractConfusionPairs(refs, inputs, static_cast<std::size_t>(cfg.eval.top_k), &vocab);
  }
  return report;
}

void CmdEval(const RunConfig& cfg, const FramePredictor& predict) {
  ValidateRunConfig(cfg);
  RequirePath(cfg.paths.slu_test, "slu_test");
  Begin(cfg, "eval");
  const MetricReport report = EvaluateTestSet(cfg, predict);
  WriteText(OutPath(cfg, "eval_report.json"), ReportJson(report));
  WriteText(OutPath(cfg, "eval_report.jsonl"), ReportJsonl(report));
}

void CmdEval(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  RequirePath(cfg.paths.dict, "dict");
  RequirePath(cfg.paths.vocab, "vocab");
  const std::string ckpt = cfg.FinetuneCheckpointPath();
  RequirePath(ckpt, "finetune_checkpoint");
  const Lexicon lex = Lexicon::Load(cfg.paths.dict);
  const Vocab vocab = Vocab::Load(cfg.paths.vocab);
  const ModelParams params = LoadCheckpoint(ckpt);
  const SluLabels labels = SluLabels::Load(LabelsPath(ckpt));
  const FinetuneMeta meta = LoadMeta(MetaPath(ckpt));
  const bool with_phones =
      meta.options.use_phone_embeddings && meta.options.layout == FinetuneLayout::kAdditive;
  const SluEncoder encoder(lex, vocab, params.config.max_seq_len, meta.options.layout);

  CmdEval(cfg, [&](const std::string& text, std::size_t) {
    FramePrediction out;
    if (SplitWhitespace(text).empty()) {
      // An empty ASR hypothesis carries no evidence; predict the first intent.
      out.intent = labels.intents.Label(0);
      return out;
    }
    const SluPrediction p = Predict(params, encoder.Encode(text, with_phones, meta.beta));
    out.intent = labels.intents.Label(p.intent);
    if (meta.options.mode == FinetuneMode::kJoint) {
      std::vector<std::string> words = encoder.Words(text);
      words.resize(p.tags.size());
      std::vector<std::string> tags;
      for (std::int32_t t : p.tags) tags.push_back(labels.tags.Label(t));
      out.slots = BioToSlots(words, tags);
    }
    return out;
  });
}

void CmdMrr(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  RequirePath(cfg.paths.vocab, "vocab");
  RequirePath(cfg.paths.mrr_refs, "mrr_refs");
  RequirePath(cfg.paths.mrr_hyps, "mrr_hyps");
  RequirePath(cfg.PretrainCheckpointPath(), "pretrain_checkpoint");
  Begin(cfg, "mrr");
  const Vocab vocab = Vocab::Load(cfg.paths.vocab);
  const ModelParams params = LoadCheckpoint(cfg.PretrainCheckpointPath());
  const auto pairs = ExtractConfusionPairs(ReadLines(cfg.paths.mrr_refs), ReadLines(cfg.paths.mrr_hyps),
                                           static_cast<std::size_t>(cfg.eval.top_k), &vocab);
  const MrrResult r = Mrr(pairs, params.token_embedding, vocab);
  const std::string label = cfg.eval.model_label.empty() ? cfg.preset : cfg.eval.model_label;

  Json report;
  report["model"] = label;
  report["mrr"] = r.mrr;
  report["pairs"] = Json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    report["pairs"].push_back(
        {{"hyp", pairs[i].hyp_word}, {"ref", pairs[i].ref_word}, {"count", pairs[i].count}, {"rank", r.ranks[i]}});
  }
  WriteText(OutPath(cfg, "mrr_report.json"), report.dump(2) + "\n");
  WriteText(OutPath(cfg, "mrr_table.tsv"), FormatMrrTable({{label, r.mrr}}));
}

}  // namespace tpslu
