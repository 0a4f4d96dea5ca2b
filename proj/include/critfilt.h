#ifndef CRITFILT_H
#define CRITFILT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define CF_API __declspec(dllexport)
#else
#  define CF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cf_status {
  CF_OK = 0,
  CF_INVALID_ARGUMENT = 1, /* null handle or out-of-range argument */
  CF_CONFIG = 2,           /* invalid configuration or input files */
  CF_NUMERIC = 3,          /* solver stall, non-convergence or non-finite values */
  CF_IO = 4,               /* output could not be written */
  CF_INTERNAL = 5
} cf_status;

typedef struct cf_config cf_config;
typedef struct cf_result cf_result;

/* Message of the last failed call on this thread; never NULL. */
CF_API const char* cf_last_error(void);
CF_API const char* cf_version(void);

CF_API cf_status cf_config_load(const char* path, cf_config** out);
/* Relative paths in the text resolve against base_dir (NULL: working directory). */
CF_API cf_status cf_config_parse(const char* text, const char* base_dir, cf_config** out);
CF_API void cf_config_free(cf_config* config);

CF_API cf_status cf_config_set_seed(cf_config* config, uint64_t seed);
CF_API cf_status cf_config_set_iterations(cf_config* config, size_t iterations);
/* Constant sample count per iteration; 0 restores the schedule. */
CF_API cf_status cf_config_set_samples(cf_config* config, size_t samples);
CF_API cf_status cf_config_set_output(cf_config* config, const char* directory);
/* Empty path: no data file (bench then synthesizes its data). */
CF_API cf_status cf_config_set_data(cf_config* config, const char* path);
/* Per-iteration progress lines on stderr. */
CF_API cf_status cf_config_set_verbose(cf_config* config, int verbose);
CF_API const char* cf_config_output(const cf_config* config);

/* Commands write into out_dir, or the configured output directory if NULL. */
CF_API cf_status cf_synth(const cf_config* config, const char* out_dir);
/* Returns CF_NUMERIC with *result set (partial outputs written) when a solver fails mid-run. */
CF_API cf_status cf_reconstruct(const cf_config* config, const char* out_dir, cf_result** result);
CF_API cf_status cf_bench(const cf_config* config, const char* out_dir, cf_result** result);
CF_API cf_status cf_moments(const cf_config* config, const char* state_dir, const char* out_dir);

/* Reconstruct results hold one KL curve; bench results hold the reformulated
   curve (index 0) and the legacy curve (index 1) plus the reference KL. */
CF_API size_t cf_result_curve_count(const cf_result* result);
CF_API size_t cf_result_iterations(const cf_result* result, size_t curve);
CF_API double cf_result_kl(const cf_result* result, size_t curve, size_t iteration);
CF_API double cf_result_reference_kl(const cf_result* result);
CF_API int cf_result_converged(const cf_result* result);
/* NULL when every run completed. */
CF_API const char* cf_result_failure(const cf_result* result);
CF_API void cf_result_free(cf_result* result);

#ifdef __cplusplus
}
#endif

#endif
