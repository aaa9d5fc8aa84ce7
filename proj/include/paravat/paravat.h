// Copyright 2026 The paravat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the paravat library. Every call returns a paravat_status;
 * on failure paravat_last_error() describes the problem (per thread, valid
 * until the next call on that thread). Strings handed out through char**
 * must be released with paravat_string_free. */

#ifndef PARAVAT_PARAVAT_H_
#define PARAVAT_PARAVAT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PARAVAT_API __declspec(dllexport)
#else
#define PARAVAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum paravat_status {
  PARAVAT_OK = 0,
  PARAVAT_ERR_INTERNAL = 1,
  PARAVAT_ERR_INPUT = 2,      /* bad argument, unreadable path, locked dir */
  PARAVAT_ERR_DIVERGENCE = 3, /* non-finite loss during training */
  PARAVAT_ERR_MALFORMED = 4,  /* malformed data file or checkpoint */
  PARAVAT_ERR_SCHEMA = 5      /* report inputs with mismatched schemas */
} paravat_status;

typedef struct paravat_config paravat_config;
typedef struct paravat_model paravat_model;

/* Progress callback; `line` is only valid during the call. */
typedef void (*paravat_log_fn)(const char* line, void* user);

PARAVAT_API const char* paravat_version(void);
PARAVAT_API const char* paravat_last_error(void);
PARAVAT_API void paravat_string_free(char* s);

/* Configuration. */
PARAVAT_API paravat_status paravat_config_default(paravat_config** out);
PARAVAT_API paravat_status paravat_config_load(const char* path,
                                               paravat_config** out);
/* `key` is "section.name" (e.g. "vat.alpha") or "seed". */
PARAVAT_API paravat_status paravat_config_set(paravat_config* config,
                                              const char* key,
                                              const char* value);
/* Sets the global seed and re-derives every component seed from it. */
PARAVAT_API paravat_status paravat_config_set_seed(paravat_config* config,
                                                   uint64_t seed);
PARAVAT_API paravat_status paravat_config_serialize(
    const paravat_config* config, char** out);
PARAVAT_API void paravat_config_free(paravat_config* config);

/* Commands. */
PARAVAT_API paravat_status paravat_build_vocab(const char* corpus_path,
                                               const char* mode,
                                               int max_size,
                                               const char* out_path,
                                               int* entries,
                                               double* coverage_percent);
PARAVAT_API paravat_status paravat_corrupt(const paravat_config* config,
                                           const char* corpus_path,
                                           const char* out_path, int* pairs);
/* `resume` may be NULL. `final_checkpoint` may be NULL. */
PARAVAT_API paravat_status paravat_train(const paravat_config* config,
                                         const char* resume,
                                         paravat_log_fn log, void* user,
                                         char** final_checkpoint);

PARAVAT_API paravat_status paravat_model_load(const char* path,
                                              paravat_model** out);
/* Copy of the configuration stored in the checkpoint. */
PARAVAT_API paravat_status paravat_model_config(const paravat_model* model,
                                                paravat_config** out);
PARAVAT_API void paravat_model_free(paravat_model* model);

/* `input` holds newline-separated lines; `output` receives one line per
 * input line. Lines that fail are echoed and described in `warnings`
 * (newline-separated, may be empty). `config` NULL means the checkpoint's
 * own configuration. `warnings` may be NULL. */
PARAVAT_API paravat_status paravat_paraphrase(const paravat_model* model,
                                              const paravat_config* config,
                                              const char* input, char** output,
                                              char** warnings);
/* `eval_path` NULL means the configuration's paths.eval_set. */
PARAVAT_API paravat_status paravat_evaluate(const paravat_model* model,
                                            const paravat_config* config,
                                            const char* eval_path,
                                            const char* out_prefix,
                                            char** table);
PARAVAT_API paravat_status paravat_report(const char* const* inputs,
                                          size_t count,
                                          const char* out_prefix,
                                          char** table);

#ifdef __cplusplus
}
#endif

#endif /* PARAVAT_PARAVAT_H_ */
