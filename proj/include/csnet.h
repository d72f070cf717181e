#ifndef CSNET_H
#define CSNET_H

/* C interface to the C*-algebra network library. All functions return
 * CSNET_OK on success; on failure csnet_last_error() describes the problem. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CSNET_OK 0
#define CSNET_ERR_RUNTIME 1 /* execution failure */
#define CSNET_ERR_CONFIG 2  /* usage or configuration error */

/* Library version string, e.g. "0.1.0". */
const char* csnet_version(void);

/* Thread-local message for the most recent failure. */
const char* csnet_last_error(void);

/* Opaque experiment configuration handle. */
typedef struct csnet_config csnet_config;

/* Fresh configuration with default values; free with csnet_config_free. */
csnet_config* csnet_config_create(void);
void csnet_config_free(csnet_config* cfg);

/* Replace cfg with the contents of a key=value config file (unset keys fall
 * back to defaults). */
int csnet_config_load(csnet_config* cfg, const char* path);

/* Set a single key. Unknown keys or malformed values -> CSNET_ERR_CONFIG. */
int csnet_config_set(csnet_config* cfg, const char* key, const char* value);

/* Read a single key's current value into out (NUL-terminated, truncated to
 * out_len). Unknown keys -> CSNET_ERR_CONFIG. */
int csnet_config_get(const csnet_config* cfg, const char* key, char* out, size_t out_len);

/* Validate and run the experiment described by cfg; artifacts are written to
 * its out_dir. */
int csnet_run(const csnet_config* cfg);

/* Comparison table across finished run directories (>= 2, same task). The
 * table text is written into out (NUL-terminated, truncated to out_len). */
int csnet_report(const char* const* run_dirs, size_t n_dirs, char* out, size_t out_len);

/* Built-in property checks; one result line per check is written into out.
 * Returns CSNET_OK when every check passes, CSNET_ERR_RUNTIME otherwise. */
int csnet_selftest(char* out, size_t out_len);

#ifdef __cplusplus
}
#endif

#endif /* CSNET_H */
