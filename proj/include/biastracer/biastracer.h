#ifndef BIASTRACER_H
#define BIASTRACER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(BT_BUILDING_LIBRARY)
#define BT_API __attribute__((visibility("default")))
#else
#define BT_API
#endif

typedef enum bt_status {
  BT_OK = 0,
  BT_ERR_INVALID_ARGUMENT = 1,
  BT_ERR_IO = 2,
  BT_ERR_MALFORMED_RECORD = 3,
  BT_ERR_DANGLING_PROMPT_RELATION = 4,
  BT_ERR_DUPLICATE_RELATION_ID = 5,
  BT_ERR_PROMPT_COUNT_VIOLATION = 6,
  BT_ERR_NO_CONTROL_AVAILABLE = 7,
  BT_ERR_EMPTY_CORPUS = 8,
  BT_ERR_SEQUENCE_TOO_LONG = 9,
  BT_ERR_OVERRIDE_OUT_OF_BOUNDS = 10,
  BT_ERR_NO_MASK_POSITION = 11,
  BT_ERR_ANSWER_NOT_IN_VOCAB = 12,
  BT_ERR_NON_FINITE_LOSS = 13,
  BT_ERR_VOCAB_TOO_SMALL = 14,
  BT_ERR_TOO_FEW_SETS = 15,
  BT_ERR_TOO_FEW_RELATIONS = 16,
  BT_ERR_ALL_ZERO_DIFFERENCES = 17,
  BT_ERR_EMPTY_INPUT = 18,
  BT_ERR_LENGTH_MISMATCH = 19,
  BT_ERR_CONSTANT_INPUT = 20,
  BT_ERR_EMPTY_PROMPT_SET = 21,
  BT_ERR_STAGE_FAILED = 22,
  BT_ERR_INTERNAL = 99
} bt_status;

BT_API const char* bt_version(void);
BT_API const char* bt_status_name(bt_status status);

/* Message of the last failing call on this thread; "" after a success. */
BT_API const char* bt_last_error(void);

/* Frees any char* returned through an out parameter. NULL is ignored. */
BT_API void bt_string_free(char* s);

/* ---- options: flat key/value configuration -------------------------------- */

typedef struct bt_options bt_options;

BT_API bt_status bt_options_new(bt_options** out);
/* Merges a "key = value" file; relative path.* values resolve against its directory. */
BT_API bt_status bt_options_load(bt_options* opts, const char* path);
BT_API bt_status bt_options_set(bt_options* opts, const char* key, const char* value);
/* BT_ERR_INVALID_ARGUMENT when the key is absent. */
BT_API bt_status bt_options_get(const bt_options* opts, const char* key, char** out_value);
BT_API void bt_options_free(bt_options* opts);

/* ---- commands ------------------------------------------------------------- */

/* command is one of: dataset-validate, dataset-summary, corpus-synth,
   train-toy, trace, select, erase, amplify, stats, eval-tasks, report,
   pipeline. out_text (may be NULL) receives what the command prints. */
BT_API bt_status bt_run_command(const char* command, const bt_options* opts, char** out_text);

/* ---- dataset -------------------------------------------------------------- */

typedef struct bt_dataset bt_dataset;

BT_API bt_status bt_dataset_load(const char* relations_path, const char* prompts_path, int strict,
                                 bt_dataset** out);
BT_API size_t bt_dataset_relation_count(const bt_dataset* ds);
BT_API size_t bt_dataset_prompt_count(const bt_dataset* ds);
BT_API bt_status bt_dataset_summary_csv(const bt_dataset* ds, char** out_csv);
BT_API void bt_dataset_free(bt_dataset* ds);

/* ---- model ---------------------------------------------------------------- */

typedef struct bt_model bt_model;

typedef struct bt_model_info {
  int n_layers;
  int d_model;
  int n_heads;
  int d_ff;
  int vocab_size;
  int max_len;
  uint64_t seed;
} bt_model_info;

BT_API bt_status bt_model_load(const char* checkpoint_path, bt_model** out);
BT_API bt_status bt_model_get_info(const bt_model* model, bt_model_info* out);
/* P(answer) at the [MASK] position of text. */
BT_API bt_status bt_model_mask_prob(const bt_model* model, const char* text, const char* answer,
                                    double* out_prob);
BT_API void bt_model_free(bt_model* model);

/* ---- statistics ----------------------------------------------------------- */

typedef struct bt_wilcoxon {
  double w_plus;
  double w_minus;
  double w_min;
  double p_value;
  size_t n;
  int exact;
} bt_wilcoxon;

BT_API bt_status bt_wilcoxon_signed_rank(const double* before, const double* after, size_t n,
                                         bt_wilcoxon* out);
BT_API bt_status bt_cliffs_delta(const double* x, size_t nx, const double* y, size_t ny, double* out);
BT_API bt_status bt_spearman(const double* x, const double* y, size_t n, double* out_rho,
                             double* out_p);

#ifdef __cplusplus
}
#endif

#endif
