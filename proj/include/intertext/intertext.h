#ifndef INTERTEXT_H
#define INTERTEXT_H

/* C interface to the allusion-detection pipeline.
 *
 * A run is opened from a configuration file and driven stage by stage (or
 * end to end). Every function returns an itx_status; on any failure
 * itx_last_error() holds a message describing it. Returned text buffers are
 * owned by the caller and released with itx_text_free().
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum itx_status {
    ITX_OK = 0,
    ITX_ERR_INTERNAL = 1,
    ITX_ERR_CONFIG = 2,
    ITX_ERR_INGEST = 3,
    ITX_ERR_INDEX = 4,
    ITX_ERR_UNKNOWN_VERSE = 5,
    ITX_ERR_PROVIDER = 6,
    ITX_ERR_PARSE = 7,
    ITX_ERR_MISSING_TRANSCRIPT = 8,
    ITX_ERR_DEGENERATE_VECTOR = 9,
    ITX_ERR_DOMAIN = 10,
    ITX_ERR_EXPORT = 11,
    ITX_ERR_STAGE = 12,
    ITX_ERR_SEARCH_UNAVAILABLE = 13,
    ITX_ERR_BAD_ARGUMENT = 14
} itx_status;

/* Opaque handle to one configured run. */
typedef struct itx_run itx_run;

/* Library version, e.g. "1.0.0". Static storage; do not free. */
const char* itx_version(void);

/* Comma-separated stage names in run order. Static storage; do not free. */
const char* itx_stage_names(void);

/* Message from the most recent failed call on this thread. Static storage;
 * do not free. Empty string when the last call succeeded. */
const char* itx_last_error(void);

/* Loads the configuration file and opens a run. On success *out_run owns the
 * handle until itx_run_close. */
itx_status itx_run_open(const char* config_path, itx_run** out_run);

void itx_run_close(itx_run* run);

/* Forces review replay from the given transcript file, overriding the
 * configured review provider. */
itx_status itx_run_set_replay(itx_run* run, const char* transcript_path);

/* Runs one stage by name (see itx_stage_names). force = nonzero reruns the
 * stage even when its inputs are unchanged. */
itx_status itx_run_stage(itx_run* run, const char* stage, int force);

/* Runs every stage in order. */
itx_status itx_run_all(itx_run* run, int force);

/* Summary tables of the catalogued findings. Requires the report stage.
 * On success *out_text is a NUL-terminated buffer for itx_text_free. */
itx_status itx_run_report(itx_run* run, char** out_text);

/* Projected spend for the configured corpus at the configured prices. */
itx_status itx_run_cost(itx_run* run, char** out_text);

void itx_text_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* INTERTEXT_H */
