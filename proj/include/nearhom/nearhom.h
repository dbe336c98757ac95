/* C interface to the nearhom library. Every call returns an nh_status; on failure a
 * message is available from nh_last_error() on the calling thread. Strings returned
 * through char** are owned by the caller and released with nh_string_free. */
#ifndef NEARHOM_H
#define NEARHOM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define NH_API __declspec(dllexport)
#else
#define NH_API __attribute__((visibility("default")))
#endif

typedef enum {
  NH_OK = 0,
  NH_ERR_INVALID_ARGUMENT = 1,
  NH_ERR_DIMENSION = 2,
  NH_ERR_DOMAIN = 3,
  NH_ERR_NUMERICAL = 4,
  NH_ERR_IO = 5,
  NH_ERR_INTERNAL = 6
} nh_status;

typedef struct nh_config nh_config;
typedef struct nh_model nh_model;
typedef struct nh_result nh_result;

NH_API const char* nh_version(void);
NH_API const char* nh_last_error(void);
NH_API void nh_string_free(char* s);

/* Experiment configuration: YAML (.yaml/.yml) or JSON file, or a JSON string. */
NH_API nh_status nh_config_load(const char* path, nh_config** out);
NH_API nh_status nh_config_from_json(const char* json, nh_config** out);
NH_API nh_status nh_config_set_seed(nh_config* cfg, uint64_t seed);
NH_API nh_status nh_config_set_out_dir(nh_config* cfg, const char* dir);
NH_API nh_status nh_config_set_threads(nh_config* cfg, int threads);
NH_API void nh_config_free(nh_config* cfg);

/* Order report ({M, p, q, ...}) for the configured model and dataset. */
NH_API nh_status nh_orders(const nh_config* cfg, char** out_json);
/* Composed order of a bare block list {"blocks": [...]} without building parameters. */
NH_API nh_status nh_orders_from_spec(const char* spec_json, char** out_json);
/* Sampled near-homogeneity check; the report's "passed" field holds the verdict. */
NH_API nh_status nh_verify(const nh_config* cfg, char** out_json);
/* f_M at every sample for the given theta, plus the error-bound check on sampled parameters. */
NH_API nh_status nh_homogenize(const nh_config* cfg, const double* theta, size_t len, char** out_json);
/* KKT certificate at theta; b_const <= 0 selects rho / fM_min^{1/M}. */
NH_API nh_status nh_kkt(const nh_config* cfg, const double* theta, size_t len, double b_const, char** out_json);

/* Full pipeline; writes the trajectory CSV and summary JSON under the configured out_dir. */
NH_API nh_status nh_run(const nh_config* cfg, nh_result** out);
NH_API nh_status nh_result_summary(const nh_result* res, char** out_json);
NH_API nh_status nh_result_trajectory_csv(const nh_result* res, char** out_csv);
NH_API int nh_result_passed(const nh_result* res);
NH_API void nh_result_free(nh_result* res);

/* Rate fit over a trajectory CSV; window_start <= 0 fits the last decade. */
NH_API nh_status nh_rates_csv(const char* csv_path, int M, double window_start, char** out_json);
/* Pass/fail listing from a summary JSON string; *passed is 1 when every check passed. */
NH_API nh_status nh_report(const char* summary_json, char** out_text, int* passed);

/* Networks built from {"input_dim", "blocks"}. */
NH_API nh_status nh_model_from_json(const char* json, nh_model** out);
NH_API int nh_model_param_dim(const nh_model* m);
NH_API int nh_model_input_dim(const nh_model* m);
NH_API nh_status nh_model_forward(const nh_model* m, const double* theta, const double* x, double* out);
/* Writes df/dtheta (param_dim entries) and returns f through *value. */
NH_API nh_status nh_model_grad(const nh_model* m, const double* theta, const double* x, double* grad, double* value);
NH_API void nh_model_free(nh_model* m);

#ifdef __cplusplus
}
#endif

#endif
