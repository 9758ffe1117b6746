/* C interface to the comment-update pipeline.
 *
 * Strings returned through char** out-parameters are heap-allocated by the
 * library and must be released with cup_string_free. Functions that take a
 * context record a message retrievable with cup_last_error; the others record
 * it per thread (cup_thread_last_error). */
#ifndef CUP_CUP_H
#define CUP_CUP_H

#include <stddef.h>

#if defined(CUP_BUILDING_LIBRARY)
#define CUP_API __attribute__((visibility("default")))
#else
#define CUP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cup_status {
  CUP_OK = 0,
  CUP_INVALID_ARGUMENT = 1,
  CUP_PARSE = 2,
  CUP_VALIDATION = 3,
  CUP_IO = 4,
  CUP_CONFIG = 5,
  CUP_TRANSPORT = 6,
  CUP_CACHE_INTEGRITY = 7,
  CUP_NUMERIC = 8,
  CUP_CONTRACT = 9,
  CUP_INTERNAL = 10
} cup_status;

typedef struct cup_context cup_context;

/* Short stable name such as "parse" or "transport". */
CUP_API const char* cup_status_name(cup_status status);
CUP_API const char* cup_version(void);

/* config_json may be NULL or empty for defaults. */
CUP_API cup_status cup_context_create(const char* config_json, cup_context** out);
CUP_API void cup_context_destroy(cup_context* ctx);
CUP_API const char* cup_last_error(const cup_context* ctx);
/* Effective configuration after defaults, as JSON. */
CUP_API cup_status cup_context_config(cup_context* ctx, char** config_json);

/* Subcommands. Inputs and outputs come from the context's config paths;
 * summary_json receives a one-line JSON summary (may be NULL). */
CUP_API cup_status cup_augment(cup_context* ctx, char** summary_json);
CUP_API cup_status cup_train(cup_context* ctx, char** summary_json);
CUP_API cup_status cup_update(cup_context* ctx, char** summary_json);
CUP_API cup_status cup_evaluate(cup_context* ctx, char** summary_json);
CUP_API cup_status cup_classify(cup_context* ctx, char** summary_json);
CUP_API cup_status cup_retrieve(cup_context* ctx, char** summary_json);

CUP_API void cup_string_free(char* s);
CUP_API const char* cup_thread_last_error(void);

/* Stateless helpers. */
CUP_API cup_status cup_accuracy(const char* updated, const char* ground_truth, int* out);
CUP_API cup_status cup_bleu4(const char* updated, const char* ground_truth, double* out);
CUP_API cup_status cup_meteor(const char* updated, const char* ground_truth, double* out);
CUP_API cup_status cup_rouge_l(const char* updated, const char* ground_truth, double* out);
CUP_API cup_status cup_listwise_loss(double positive, const double* negatives, size_t count, double lambda,
                                     double* out);
/* JSON array of camel-case parts. */
CUP_API cup_status cup_camel_split(const char* token, char** parts_json);

#ifdef __cplusplus
}
#endif

#endif /* CUP_CUP_H */
