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

#ifndef TPSLU_TPSLU_H_
#define TPSLU_TPSLU_H_

#include <stddef.h>
#include <stdint.h>

#if defined(TPSLU_BUILDING_LIBRARY)
#define TPSLU_API __attribute__((visibility("default")))
#else
#define TPSLU_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tpslu_status {
  TPSLU_OK = 0,
  TPSLU_ERR_INVALID_ARGUMENT = 1,
  TPSLU_ERR_PARSE = 2,
  TPSLU_ERR_IO = 3,
  TPSLU_ERR_CONFIG = 4,
  TPSLU_ERR_NUMERIC = 5,
  TPSLU_ERR_CONTRACT = 6,
  TPSLU_ERR_FORMAT = 7,
  TPSLU_ERR_INTERNAL = 99
} tpslu_status;

typedef struct tpslu_config tpslu_config;
typedef struct tpslu_lexicon tpslu_lexicon;
typedef struct tpslu_model tpslu_model;

TPSLU_API const char* tpslu_version(void);
TPSLU_API const char* tpslu_status_name(tpslu_status status);
// Message of the last failure on the calling thread ("" if none).
TPSLU_API const char* tpslu_last_error(void);
// Frees strings returned through char** out-parameters.
TPSLU_API void tpslu_string_free(char* s);

// Run configuration. tpslu_config_set takes "dotted.key=value" where the
// value is parsed as JSON and falls back to a plain string.
TPSLU_API tpslu_status tpslu_config_new(tpslu_config** out);
TPSLU_API tpslu_status tpslu_config_parse(const char* json, tpslu_config** out);
TPSLU_API tpslu_status tpslu_config_load(const char* path, tpslu_config** out);
TPSLU_API tpslu_status tpslu_config_set(tpslu_config* cfg, const char* assignment);
TPSLU_API tpslu_status tpslu_config_validate(const tpslu_config* cfg);
TPSLU_API tpslu_status tpslu_config_to_json(const tpslu_config* cfg, char** out_json);
TPSLU_API tpslu_status tpslu_config_save(const tpslu_config* cfg, const char* path);
TPSLU_API void tpslu_config_free(tpslu_config* cfg);

TPSLU_API size_t tpslu_preset_count(void);
// Borrowed pointer, valid for the lifetime of the library.
TPSLU_API const char* tpslu_preset_name(size_t index);

// Pipeline commands. Outputs go to the configured output directory.
TPSLU_API tpslu_status tpslu_cmd_build_lexicon(const tpslu_config* cfg);
TPSLU_API tpslu_status tpslu_cmd_prepare(const tpslu_config* cfg);
TPSLU_API tpslu_status tpslu_cmd_pretrain(const tpslu_config* cfg);
TPSLU_API tpslu_status tpslu_cmd_finetune(const tpslu_config* cfg);
TPSLU_API tpslu_status tpslu_cmd_eval(const tpslu_config* cfg);
TPSLU_API tpslu_status tpslu_cmd_mrr(const tpslu_config* cfg);

TPSLU_API tpslu_status tpslu_lexicon_load(const char* dict_path, tpslu_lexicon** out);
TPSLU_API size_t tpslu_lexicon_size(const tpslu_lexicon* lex);
// Space-separated phone symbols; "<UNK>" for unknown words.
TPSLU_API tpslu_status tpslu_lexicon_lookup(const tpslu_lexicon* lex, const char* word, char** out_phones);
TPSLU_API void tpslu_lexicon_free(tpslu_lexicon* lex);

TPSLU_API tpslu_status tpslu_model_load(const char* checkpoint_path, tpslu_model** out);
TPSLU_API tpslu_status tpslu_model_dims(const tpslu_model* model, int32_t* vocab_size, int32_t* hidden_dim);
// Copies the input embedding row of `token_id` into `out[0..len)`; len must
// equal the hidden dimension.
TPSLU_API tpslu_status tpslu_model_embedding(const tpslu_model* model, int32_t token_id, double* out,
                                             size_t len);
TPSLU_API void tpslu_model_free(tpslu_model* model);

#ifdef __cplusplus
}
#endif

#endif  // TPSLU_TPSLU_H_
