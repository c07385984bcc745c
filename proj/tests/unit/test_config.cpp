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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "tpslu/bytes.hpp"
#include "tpslu/checkpoint.hpp"
#include "tpslu/config.hpp"
#include "tpslu/error.hpp"

using namespace tpslu;

namespace {

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string Temp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("presets") {
  const auto& names = PresetNames();
  CHECK(names.size() == 8);
  CHECK(names.front() == "+MLM 15%");
  const MaskingConfig one = ApplyPreset("+condMLM 100%+condMSM 100%(oneMod)", {});
  CHECK(one.strategy == MaskStrategy::kOneMod);
  CHECK(one.word_mask_pct == 100);
  CHECK(one.phone_mask_pct == 100);
  CHECK_FALSE(one.wsa_enabled);
  const MaskingConfig two = ApplyPreset("+condMLM 30%+condMSM 30%(twoMod)+WSA", {});
  CHECK(two.strategy == MaskStrategy::kTwoMod);
  CHECK(two.word_mask_pct == 30);
  CHECK(two.wsa_enabled);
  const MaskingConfig mix = ApplyPreset("+condMSM 100%+MLM 15%(oneMod)", {});
  CHECK(mix.word_mask_pct == 0);
  CHECK(mix.phone_mask_pct == 100);
  CHECK(mix.mlm_mix_pct == 15);
  const MaskingConfig nsp = ApplyPreset("+MLM 15%+NSP", {});
  CHECK(nsp.strategy == MaskStrategy::kTextOnly);
  CHECK(nsp.wsa_enabled);
  MaskingConfig base;
  base.seed = 42;
  CHECK(ApplyPreset("+MLM 15%", base).seed == 42);
  for (const auto& n : names) CHECK_NOTHROW(ApplyPreset(n, {}).Validate());
  CHECK(CodeOf([] { ApplyPreset("+MLM 99%", {}); }) == ErrorCode::kConfig);
}

TEST_CASE("config round trip") {
  RunConfig cfg;
  cfg.preset = "+condMLM 30%+condMSM 30%(twoMod)+WSA";
  cfg.masking = ApplyPreset(cfg.preset, {});
  cfg.masking.seed = 9;
  cfg.masking.split = {0.7, 0.2, 0.1};
  cfg.model.hidden_dim = 48;
  cfg.model.restrict_lm_support = true;
  cfg.train.pretrain_lr_grid = {1e-4, 3e-4};
  cfg.train.seed = 77;
  cfg.finetune.mode = FinetuneMode::kIcOnly;
  cfg.finetune.layout = FinetuneLayout::kConcat;
  cfg.finetune.beta_grid = {0.5};
  cfg.prepare.dupe_factor = 2;
  cfg.eval.top_k = 5;
  cfg.eval.model_label = "joint";
  cfg.paths.dict = "d.txt";
  cfg.paths.out_dir = "/tmp/x";
  CHECK(RunConfigFromJson(RunConfigToJson(cfg)) == cfg);

  const auto path = Temp("tpslu_config_test.json");
  SaveRunConfig(path, cfg);
  CHECK(LoadRunConfig(path) == cfg);
  std::filesystem::remove(path);

  CHECK(RunConfigFromJson(RunConfigToJson(RunConfig{})) == RunConfig{});
}

TEST_CASE("preset first, explicit masking keys second") {
  const RunConfig a = RunConfigFromJson(R"j({"preset": "+condMLM 100%+condMSM 100%(oneMod)"})j");
  CHECK(a.masking.strategy == MaskStrategy::kOneMod);
  CHECK(a.masking.word_mask_pct == 100);
  const RunConfig b =
      RunConfigFromJson(R"j({"preset": "+condMLM 100%+condMSM 100%(oneMod)", "masking": {"word_mask_pct": 50}})j");
  CHECK(b.masking.word_mask_pct == 50);
  CHECK(b.masking.phone_mask_pct == 100);
}

TEST_CASE("overrides") {
  RunConfig c = RunConfigFromJson("{}", {"model.hidden_dim=16", "paths.out_dir=results", "train.pretrain_lr_grid=[1e-3]",
                                         "eval.use_asr=false", "paths.dict=\"quoted.txt\""});
  CHECK(c.model.hidden_dim == 16);
  CHECK(c.paths.out_dir == "results");
  CHECK(c.paths.dict == "quoted.txt");
  CHECK(c.train.pretrain_lr_grid == std::vector<double>{1e-3});
  CHECK_FALSE(c.eval.use_asr);

  // A preset override replaces the masking fields it governs.
  const RunConfig saved = RunConfigFromJson(R"({"preset": "+MLM 15%"})");
  c = RunConfigFromJson(RunConfigToJson(saved), {"preset=+condMLM 100%+condMSM 100%(oneMod)"});
  CHECK(c.masking.strategy == MaskStrategy::kOneMod);
  CHECK(c.masking.phone_mask_pct == 100);

  CHECK(CodeOf([] { RunConfigFromJson("{}", {"model.nope=1"}); }) == ErrorCode::kConfig);
  CHECK(CodeOf([] { RunConfigFromJson("{}", {"nonsense"}); }) == ErrorCode::kConfig);
}

TEST_CASE("malformed configs") {
  CHECK(CodeOf([] { RunConfigFromJson("{"); }) == ErrorCode::kParse);
  CHECK(CodeOf([] { RunConfigFromJson(R"({"bogus": {}})"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([] { RunConfigFromJson(R"({"model": {"hidden": 3}})"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([] { RunConfigFromJson(R"({"model": {"hidden_dim": "big"}})"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([] { RunConfigFromJson(R"({"masking": {"strategy": "threeMod"}})"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([] { LoadRunConfig("/nonexistent/cfg.json"); }) == ErrorCode::kIo);
}

TEST_CASE("validation") {
  RunConfig c;
  CHECK_NOTHROW(ValidateRunConfig(c));
  c.masking = ApplyPreset("+condMLM 100%+condMSM 100%(oneMod)", {});
  c.masking.wsa_enabled = true;
  CHECK(CodeOf([&] { ValidateRunConfig(c); }) == ErrorCode::kConfig);
  c = {};
  c.model.num_heads = 5;
  CHECK(CodeOf([&] { ValidateRunConfig(c); }) == ErrorCode::kConfig);
  c = {};
  c.train.pretrain_lr_grid.clear();
  CHECK(CodeOf([&] { ValidateRunConfig(c); }) == ErrorCode::kConfig);
  c = {};
  c.finetune.beta_grid = {-1.0};
  CHECK(CodeOf([&] { ValidateRunConfig(c); }) == ErrorCode::kConfig);
  c = {};
  c.prepare.dupe_factor = 0;
  CHECK(CodeOf([&] { ValidateRunConfig(c); }) == ErrorCode::kConfig);
}

TEST_CASE("default output locations") {
  RunConfig c;
  c.paths.out_dir = "runs/a";
  CHECK(c.PretrainCheckpointPath() == "runs/a/pretrain.ckpt");
  CHECK(c.FinetuneCheckpointPath() == "runs/a/finetune.ckpt");
  CHECK(c.ShardDir() == "runs/a/shards");
  c.paths.pretrain_checkpoint = "elsewhere.ckpt";
  CHECK(c.PretrainCheckpointPath() == "elsewhere.ckpt");
}

TEST_CASE("checkpoint round trip and corruption") {
  ModelConfig mc;
  mc.num_layers = 1;
  mc.hidden_dim = 8;
  mc.num_heads = 2;
  mc.ffn_dim = 16;
  mc.max_seq_len = 12;
  mc.vocab_size = 30;
  mc.word_vocab_size = 20;
  mc.num_intents = 3;
  mc.num_slot_tags = 4;
  CounterRng rng(5);
  const ModelParams p = ModelParams::Initialize(mc, rng);
  CHECK(ModelConfigFromJson(ModelConfigToJson(mc)) == mc);

  const auto bytes = SerializeCheckpoint(p);
  const ModelParams q = DeserializeCheckpoint(bytes);
  CHECK(q.config == mc);
  std::vector<std::pair<std::string, Matrix>> a, b;
  p.ForEach([&](const std::string& n, const Matrix& m) { a.emplace_back(n, m); });
  q.ForEach([&](const std::string& n, const Matrix& m) { b.emplace_back(n, m); });
  CHECK(a == b);  // bit-exact

  const auto path = Temp("tpslu_ckpt_test.bin");
  SaveCheckpoint(path, p);
  CHECK(LoadCheckpoint(path).ic_w == p.ic_w);
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'Z';
  CHECK(CodeOf([&] { DeserializeCheckpoint(bad); }) == ErrorCode::kFormat);
  bad = bytes;
  bad.resize(bytes.size() - 8);
  CHECK(CodeOf([&] { DeserializeCheckpoint(bad); }) == ErrorCode::kFormat);
  bad = bytes;
  bad.push_back(0);
  CHECK(CodeOf([&] { DeserializeCheckpoint(bad); }) == ErrorCode::kFormat);
  bad = bytes;
  bad[8] = 9;  // version
  CHECK(CodeOf([&] { DeserializeCheckpoint(bad); }) == ErrorCode::kFormat);
  CHECK(CodeOf([&] { LoadCheckpoint("/nonexistent/x.ckpt"); }) == ErrorCode::kIo);
}

TEST_CASE("little-endian byte codec") {
  ByteWriter w;
  w.U32(0x01020304);
  w.F64(-2.5);
  w.Str("ab");
  const auto& b = w.bytes();
  CHECK(b[0] == 0x04);
  CHECK(b[3] == 0x01);
  ByteReader r(b);
  CHECK(r.U32() == 0x01020304);
  CHECK(r.F64() == -2.5);
  CHECK(r.Str() == "ab");
  CHECK(r.done());
  CHECK(CodeOf([&] { r.U8(); }) == ErrorCode::kFormat);
}
