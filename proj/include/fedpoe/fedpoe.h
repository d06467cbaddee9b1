/* C interface to the fedpoe simulator. */
#ifndef FEDPOE_FEDPOE_H
#define FEDPOE_FEDPOE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(FEDPOE_BUILDING)
#define FEDPOE_API __declspec(dllexport)
#else
#define FEDPOE_API __declspec(dllimport)
#endif
#else
#define FEDPOE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fedpoe_status {
    FEDPOE_OK = 0,
    FEDPOE_ERR_CONFIG = 1,
    FEDPOE_ERR_NUMERIC = 2,
    FEDPOE_ERR_BOUND = 3,
    FEDPOE_ERR_IO = 4,
    FEDPOE_ERR_ARGUMENT = 5,
    FEDPOE_ERR_INTERNAL = 6
} fedpoe_status;

typedef struct fedpoe_config fedpoe_config;
typedef struct fedpoe_result fedpoe_result;

FEDPOE_API const char* fedpoe_version(void);

/* Message of the last failed call on this thread; empty after success. */
FEDPOE_API const char* fedpoe_last_error(void);

FEDPOE_API fedpoe_status fedpoe_config_load(const char* path, fedpoe_config** out);
FEDPOE_API fedpoe_status fedpoe_config_parse(const char* text, fedpoe_config** out);
FEDPOE_API void fedpoe_config_free(fedpoe_config* config);

/* Overrides; the config is revalidated by the next run. */
FEDPOE_API fedpoe_status fedpoe_config_set_seed(fedpoe_config* config, uint64_t seed);
FEDPOE_API fedpoe_status fedpoe_config_set_mode(fedpoe_config* config, const char* mode);
FEDPOE_API fedpoe_status fedpoe_config_set_threads(fedpoe_config* config, size_t threads);
FEDPOE_API fedpoe_status fedpoe_config_set_output(fedpoe_config* config, const char* dir);

/* Resolved output directory; valid until the config is modified or freed. */
FEDPOE_API const char* fedpoe_config_output_dir(const fedpoe_config* config);

/* Runs the experiment with oracles and bound checks. */
FEDPOE_API fedpoe_status fedpoe_run(const fedpoe_config* config, fedpoe_result** out);
/* Runs the experiment and computes the hindsight oracles only. */
FEDPOE_API fedpoe_status fedpoe_oracle(const fedpoe_config* config, fedpoe_result** out);
FEDPOE_API void fedpoe_result_free(fedpoe_result* result);

/* summary.json, ledger.jsonl and trace.csv. */
FEDPOE_API fedpoe_status fedpoe_result_write(const fedpoe_result* result, const char* dir);
/* oracle.json. */
FEDPOE_API fedpoe_status fedpoe_result_write_oracle(const fedpoe_result* result, const char* dir);

/* Strings owned by the result. */
FEDPOE_API const char* fedpoe_result_summary_json(const fedpoe_result* result);
FEDPOE_API const char* fedpoe_result_oracle_json(const fedpoe_result* result);
FEDPOE_API const char* fedpoe_result_bound_table(const fedpoe_result* result);
/* Non-fatal diagnostics, one per line. */
FEDPOE_API const char* fedpoe_result_notes(const fedpoe_result* result);

FEDPOE_API size_t fedpoe_result_bound_count(const fedpoe_result* result);
FEDPOE_API size_t fedpoe_result_bounds_violated(const fedpoe_result* result);
FEDPOE_API double fedpoe_result_mean_mse(const fedpoe_result* result);

/* Digest of a summary.json from a previous run; free with fedpoe_string_free. */
FEDPOE_API fedpoe_status fedpoe_report(const char* summary_path, char** text);
FEDPOE_API void fedpoe_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* FEDPOE_FEDPOE_H */
