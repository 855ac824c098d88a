#ifndef REDACTSCOPE_H
#define REDACTSCOPE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(REDACTSCOPE_BUILDING)
#    define RS_API __declspec(dllexport)
#  else
#    define RS_API __declspec(dllimport)
#  endif
#else
#  define RS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rs_status {
  RS_OK = 0,
  RS_E_PARSE = 1,
  RS_E_VALIDATION = 2,
  RS_E_UNKNOWN_LABEL = 3,
  RS_E_STRADDLING = 4,
  RS_E_EMPTY_CLASS = 5,
  RS_E_PRECONDITION = 6,
  RS_E_DEGENERATE = 7,
  RS_E_DIMENSION = 8,
  RS_E_SHAPE = 9,
  RS_E_IO = 10,
  RS_E_CONFIG = 11,
  RS_E_INVALID_ARGUMENT = 12,
  RS_E_INTERNAL = 13
} rs_status;

#define RS_NUM_LABELS 8
#define RS_EMBEDDING_DIM 768

typedef struct rs_config rs_config;
typedef struct rs_model rs_model;
typedef struct rs_projection rs_projection;
typedef struct rs_homoglyph_map rs_homoglyph_map;

/* Message of the last failed call on this thread; never NULL. */
RS_API const char* rs_last_error(void);
RS_API const char* rs_status_name(rs_status status);
RS_API const char* rs_version(void);

/* Every char** output is heap-allocated and released with rs_string_free. */
RS_API void rs_string_free(char* s);

RS_API const char* rs_label_name(int label);

/* Corpus JSON -> samples JSONL plus a per-class statistics JSON object. */
RS_API rs_status rs_ingest(const char* corpus_json, size_t len, char** samples_jsonl, char** stats_json);

/* Synthetic court-style corpus, per_class documents per label. */
RS_API rs_status rs_generate_synthetic(uint64_t seed, size_t per_class, char** corpus_json);

/* ---- pipeline configuration ---- */

RS_API rs_status rs_config_create(rs_config** out);
RS_API void rs_config_free(rs_config* config);
/* Merges a JSON object of settings; unknown keys fail with RS_E_CONFIG. */
RS_API rs_status rs_config_merge_json(rs_config* config, const char* json, size_t len);
RS_API rs_status rs_config_load_file(rs_config* config, const char* path);
RS_API rs_status rs_config_to_json(const rs_config* config, char** json);

/* Runs the full pipeline. Any of the outputs may be NULL. *evasion_json is set
   to NULL when the evasion stage did not run. */
RS_API rs_status rs_run(const rs_config* config, char** metrics_json, char** balance_json, char** evasion_json);

/* ---- models ---- */

RS_API rs_status rs_model_load(const char* path, rs_model** out);
RS_API void rs_model_free(rs_model* model);
/* "dnn", "cnn" or "rf". */
RS_API const char* rs_model_kind(const rs_model* model);
/* scores receives RS_NUM_LABELS values. */
RS_API rs_status rs_model_predict(const rs_model* model, const double* embedding, size_t dim, int* label,
                                  double* scores);

RS_API rs_status rs_projection_identity(rs_projection** out);
RS_API rs_status rs_projection_load(const char* path, rs_projection** out);
RS_API void rs_projection_free(rs_projection* projection);

/* Embeds a redacted sentence (UTF-8); out receives dim values, dim must be 768. */
RS_API rs_status rs_embed(const rs_projection* projection, const char* sentence, size_t len, double* out,
                          size_t dim);

/* JSON array of {sentence, span, predicted_label, scores}, one per asterisk run. */
RS_API rs_status rs_attack(const rs_model* model, const rs_projection* projection, const char* text, size_t len,
                           char** predictions_json);

/* ---- character evasion ---- */

RS_API rs_status rs_homoglyph_map_default(rs_homoglyph_map** out);
/* JSON array of {"from": "U+XXXX", "to": "U+XXXX"}; malformed maps give RS_E_CONFIG. */
RS_API rs_status rs_homoglyph_map_from_json(const char* json, size_t len, rs_homoglyph_map** out);
RS_API void rs_homoglyph_map_free(rs_homoglyph_map* map);

RS_API rs_status rs_harden(const rs_homoglyph_map* map, const char* text, size_t len, char** out);
RS_API rs_status rs_fold(const rs_homoglyph_map* map, const char* text, size_t len, char** out);
/* JSON array of {position, original, confusable} with code-point labels. */
RS_API rs_status rs_detect(const rs_homoglyph_map* map, const char* text, size_t len, char** hits_json);

/* Plain-text rendering of a metrics, balance, evasion or ingest-stats JSON report. */
RS_API rs_status rs_render_report(const char* json, size_t len, char** text);

#ifdef __cplusplus
}
#endif

#endif
