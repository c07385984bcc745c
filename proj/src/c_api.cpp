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

#include "tpslu/tpslu.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "tpslu/checkpoint.hpp"
#include "tpslu/config.hpp"
#include "tpslu/error.hpp"
#include "tpslu/lexicon.hpp"
#include "tpslu/pipeline.hpp"

struct tpslu_config {
  tpslu::RunConfig cfg;
};
struct tpslu_lexicon {
  tpslu::Lexicon lex;
};
struct tpslu_model {
  tpslu::ModelParams params;
};

namespace {

thread_local std::string g_last_error;

template <class F>
tpslu_status Guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return TPSLU_OK;
  } catch (const tpslu::Error& e) {
    g_last_error = e.what();
    return static_cast<tpslu_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return TPSLU_ERR_INTERNAL;
}

void NotNull(const void* p, const char* what) {
  if (!p) throw tpslu::Error(tpslu::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class Cmd>
tpslu_status RunCommand(const tpslu_config* cfg, Cmd cmd) {
  return Guard([&] {
    NotNull(cfg, "config");
    cmd(cfg->cfg);
  });
}

}  // namespace

extern "C" {

const char* tpslu_version(void) { return "0.1.0"; }

const char* tpslu_status_name(tpslu_status status) {
  switch (status) {
    case TPSLU_OK: return "ok";
    case TPSLU_ERR_INTERNAL: return "internal";
    default: break;
  }
  const int code = static_cast<int>(status);
  if (code >= 1 && code <= 7) return tpslu::ErrorCodeName(static_cast<tpslu::ErrorCode>(code));
  return "unknown";
}

const char* tpslu_last_error(void) { return g_last_error.c_str(); }

void tpslu_string_free(char* s) { std::free(s); }

tpslu_status tpslu_config_new(tpslu_config** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = new tpslu_config{};
  });
}

tpslu_status tpslu_config_parse(const char* json, tpslu_config** out) {
  return Guard([&] {
    NotNull(json, "json");
    NotNull(out, "out");
    *out = new tpslu_config{tpslu::RunConfigFromJson(json)};
  });
}

tpslu_status tpslu_config_load(const char* path, tpslu_config** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new tpslu_config{tpslu::LoadRunConfig(path)};
  });
}

tpslu_status tpslu_config_set(tpslu_config* cfg, const char* assignment) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(assignment, "assignment");
    cfg->cfg = tpslu::RunConfigFromJson(tpslu::RunConfigToJson(cfg->cfg), {assignment});
  });
}

tpslu_status tpslu_config_validate(const tpslu_config* cfg) {
  return Guard([&] {
    NotNull(cfg, "config");
    tpslu::ValidateRunConfig(cfg->cfg);
  });
}

tpslu_status tpslu_config_to_json(const tpslu_config* cfg, char** out_json) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(out_json, "out_json");
    *out_json = Dup(tpslu::RunConfigToJson(cfg->cfg));
  });
}

tpslu_status tpslu_config_save(const tpslu_config* cfg, const char* path) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(path, "path");
    tpslu::SaveRunConfig(path, cfg->cfg);
  });
}

void tpslu_config_free(tpslu_config* cfg) { delete cfg; }

size_t tpslu_preset_count(void) { return tpslu::PresetNames().size(); }

const char* tpslu_preset_name(size_t index) {
  const auto& names = tpslu::PresetNames();
  return index < names.size() ? names[index].c_str() : nullptr;
}

tpslu_status tpslu_cmd_build_lexicon(const tpslu_config* cfg) {
  return RunCommand(cfg, [](const tpslu::RunConfig& c) { tpslu::CmdBuildLexicon(c); });
}
tpslu_status tpslu_cmd_prepare(const tpslu_config* cfg) {
  return RunCommand(cfg, [](const tpslu::RunConfig& c) { tpslu::CmdPrepare(c); });
}
tpslu_status tpslu_cmd_pretrain(const tpslu_config* cfg) {
  return RunCommand(cfg, [](const tpslu::RunConfig& c) { tpslu::CmdPretrain(c); });
}
tpslu_status tpslu_cmd_finetune(const tpslu_config* cfg) {
  return RunCommand(cfg, [](const tpslu::RunConfig& c) { tpslu::CmdFinetune(c); });
}
tpslu_status tpslu_cmd_eval(const tpslu_config* cfg) {
  return RunCommand(cfg, [](const tpslu::RunConfig& c) { tpslu::CmdEval(c); });
}
tpslu_status tpslu_cmd_mrr(const tpslu_config* cfg) {
  return RunCommand(cfg, [](const tpslu::RunConfig& c) { tpslu::CmdMrr(c); });
}

tpslu_status tpslu_lexicon_load(const char* dict_path, tpslu_lexicon** out) {
  return Guard([&] {
    NotNull(dict_path, "dict_path");
    NotNull(out, "out");
    *out = new tpslu_lexicon{tpslu::Lexicon::Load(dict_path)};
  });
}

size_t tpslu_lexicon_size(const tpslu_lexicon* lex) { return lex ? lex->lex.size() : 0; }

tpslu_status tpslu_lexicon_lookup(const tpslu_lexicon* lex, const char* word, char** out_phones) {
  return Guard([&] {
    NotNull(lex, "lexicon");
    NotNull(word, "word");
    NotNull(out_phones, "out_phones");
    std::string joined;
    for (const auto& p : lex->lex.LookupSymbols(word)) {
      if (!joined.empty()) joined += ' ';
      joined += p;
    }
    *out_phones = Dup(joined);
  });
}

void tpslu_lexicon_free(tpslu_lexicon* lex) { delete lex; }

tpslu_status tpslu_model_load(const char* checkpoint_path, tpslu_model** out) {
  return Guard([&] {
    NotNull(checkpoint_path, "checkpoint_path");
    NotNull(out, "out");
    *out = new tpslu_model{tpslu::LoadCheckpoint(checkpoint_path)};
  });
}

tpslu_status tpslu_model_dims(const tpslu_model* model, int32_t* vocab_size, int32_t* hidden_dim) {
  return Guard([&] {
    NotNull(model, "model");
    if (vocab_size) *vocab_size = model->params.config.vocab_size;
    if (hidden_dim) *hidden_dim = model->params.config.hidden_dim;
  });
}

tpslu_status tpslu_model_embedding(const tpslu_model* model, int32_t token_id, double* out, size_t len) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(out, "out");
    const auto& e = model->params.token_embedding;
    if (token_id < 0 || token_id >= e.rows()) {
      throw tpslu::Error(tpslu::ErrorCode::kInvalidArgument, "token id out of range");
    }
    if (len != static_cast<size_t>(e.cols())) {
      throw tpslu::Error(tpslu::ErrorCode::kInvalidArgument, "output length must equal the hidden size");
    }
    for (size_t i = 0; i < len; ++i) out[i] = e(token_id, static_cast<Eigen::Index>(i));
  });
}

void tpslu_model_free(tpslu_model* model) { delete model; }

}  // extern "C"
