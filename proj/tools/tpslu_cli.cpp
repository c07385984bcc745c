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

// Command-line front end over the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpslu/tpslu.h"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
};

int Fail(const char* what) {
  std::fprintf(stderr, "tpslu: error: %s: %s\n", what, tpslu_last_error());
  return 1;
}

tpslu_status PrintConfig(const tpslu_config* cfg) {
  char* json = nullptr;
  const tpslu_status st = tpslu_config_to_json(cfg, &json);
  if (st == TPSLU_OK) std::fputs(json, stdout);
  tpslu_string_free(json);
  return st;
}

int Run(const Options& opts, tpslu_status (*command)(const tpslu_config*), const char* name) {
  tpslu_config* cfg = nullptr;
  const tpslu_status loaded = opts.config_path.empty() ? tpslu_config_new(&cfg)
                                                       : tpslu_config_load(opts.config_path.c_str(), &cfg);
  if (loaded != TPSLU_OK) return Fail("config");
  for (const auto& o : opts.overrides) {
    if (tpslu_config_set(cfg, o.c_str()) != TPSLU_OK) {
      tpslu_config_free(cfg);
      return Fail("--set");
    }
  }
  const tpslu_status st = command(cfg);
  tpslu_config_free(cfg);
  if (st != TPSLU_OK) return Fail(name);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint text and phone pre-training for spoken language understanding"};
  app.require_subcommand(1);
  Options opts;

  struct Entry {
    const char* name;
    const char* help;
    tpslu_status (*fn)(const tpslu_config*);
  };
  const Entry entries[] = {
      {"build-lexicon", "Parse the pronunciation dictionary and write the phone vocabulary",
       tpslu_cmd_build_lexicon},
      {"prepare", "Generate masked pre-training shards", tpslu_cmd_prepare},
      {"pretrain", "Pre-train the encoder on prepared shards", tpslu_cmd_pretrain},
      {"finetune", "Fine-tune intent and slot heads", tpslu_cmd_finetune},
      {"eval", "Score the fine-tuned model on the test set", tpslu_cmd_eval},
      {"mrr", "Rank confusion pairs by embedding similarity", tpslu_cmd_mrr},
      {"show-config", "Print the effective configuration", PrintConfig},
  };
  const Entry* chosen = nullptr;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", opts.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "Override a field, e.g. --set train.max_steps=100")
        ->take_all()
        ->allow_extra_args(false);
    sub->callback([&chosen, &e] { chosen = &e; });
  }
  app.add_subcommand("presets", "List the named pre-training task presets")->callback([] {
    for (std::size_t i = 0; i < tpslu_preset_count(); ++i) std::printf("%s\n", tpslu_preset_name(i));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return chosen ? Run(opts, chosen->fn, chosen->name) : 0;
}
