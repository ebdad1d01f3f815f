#ifndef LAB_C_H
#define LAB_C_H

/* C interface to the lab core. Handles are opaque; every call returns a status code and, on failure,
   stores a message readable with lab_last_error() on the same thread. Strings returned by the library
   are owned by the caller and released with lab_string_free(). */

#include <stddef.h>

#if defined(_WIN32)
#define LAB_API __declspec(dllexport)
#else
#define LAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
  LAB_OK = 0,
  LAB_ERR_NUMERICAL = 1, /* solver failure, unresolved run, contract violation */
  LAB_ERR_CONFIG = 2,    /* bad key, bad type, infeasible exponents, invalid parameters */
  LAB_ERR_IO = 3,
  LAB_ERR_ARGUMENT = 4   /* null handle or pointer */
};

typedef struct lab_config lab_config;
typedef struct lab_result lab_result;
typedef struct lab_sim lab_sim;

LAB_API const char* lab_version(void);
/* message of the last failed call on this thread, "" if none; valid until the next call */
LAB_API const char* lab_last_error(void);
LAB_API void lab_string_free(char* s);

LAB_API int lab_config_new(lab_config** out);
/* JSON text; unknown keys and mismatched types are rejected */
LAB_API int lab_config_load(lab_config** out, const char* json_text);
/* dotted path such as "simulate.bubbles[0].kappa"; value is JSON, or a bare string */
LAB_API int lab_config_set(lab_config* cfg, const char* path, const char* value);
/* full config with defaults filled in */
LAB_API int lab_config_dump(const lab_config* cfg, char** json_out);
LAB_API void lab_config_free(lab_config* cfg);

LAB_API int lab_run(const lab_config* cfg, lab_result** out);
LAB_API int lab_result_summary(const lab_result* r, char** json_out);
/* 1 unless the run reported divergence */
LAB_API int lab_result_ok(const lab_result* r);
LAB_API void lab_result_free(lab_result* r);

/* direct access to the coupled simulator, built from the "simulate" section */
LAB_API int lab_sim_new(const lab_config* cfg, lab_sim** out);
LAB_API int lab_sim_advance(lab_sim* s, double dt);
LAB_API int lab_sim_time(const lab_sim* s, double* t);
LAB_API int lab_sim_energy(const lab_sim* s, double* e);
/* concentration scale and center of the first bubble */
LAB_API int lab_sim_scale(const lab_sim* s, double* lambda, double* xi1, double* xi2);
LAB_API int lab_sim_save(const lab_sim* s, const char* path);
LAB_API int lab_sim_load(lab_sim* s, const char* path);
LAB_API void lab_sim_free(lab_sim* s);

#ifdef __cplusplus
}
#endif

#endif
