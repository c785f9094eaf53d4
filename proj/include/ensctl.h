#ifndef ENSCTL_H
#define ENSCTL_H

#include <stddef.h>
#include <stdint.h>

#if defined(ENSCTL_BUILDING)
#define ENSCTL_API __attribute__((visibility("default")))
#else
#define ENSCTL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ensctl_status {
  ENSCTL_OK = 0,
  ENSCTL_E_INVALID_ARGUMENT = 1,
  ENSCTL_E_DIMENSION_MISMATCH = 2,
  ENSCTL_E_UNSUPPORTED_INPUT = 3,
  ENSCTL_E_DOMAIN = 4,
  ENSCTL_E_SYNTAX = 5,
  ENSCTL_E_DEGENERATE = 6,
  ENSCTL_E_INFEASIBLE = 7,
  ENSCTL_E_ACCURACY = 8,
  ENSCTL_E_DIVERGENCE = 9,
  ENSCTL_E_CONFIG = 10,
  ENSCTL_E_IO = 11,
  ENSCTL_E_NULL_ARGUMENT = 12,
  ENSCTL_E_INTERNAL = 99
} ensctl_status;

typedef enum ensctl_verdict {
  ENSCTL_GENERATING = 0,
  ENSCTL_SINGULAR = 1,
  ENSCTL_BORDERLINE = 2
} ensctl_verdict;

typedef struct ensctl_scenario ensctl_scenario;
typedef struct ensctl_field ensctl_field;
typedef struct ensctl_expr ensctl_expr;

ENSCTL_API const char* ensctl_version(void);
ENSCTL_API const char* ensctl_status_name(ensctl_status status);
/* Message of the last failing call on this thread; empty after success. */
ENSCTL_API const char* ensctl_last_error(void);
ENSCTL_API void ensctl_string_free(char* s);

/* Scenarios. */
ENSCTL_API ensctl_status ensctl_scenario_load(const char* path, ensctl_scenario** out);
ENSCTL_API ensctl_status ensctl_scenario_parse(const char* yaml, ensctl_scenario** out);
ENSCTL_API void ensctl_scenario_free(ensctl_scenario* s);
/* Borrowed pointer, valid while s lives. */
ENSCTL_API const char* ensctl_scenario_kind(const ensctl_scenario* s);
ENSCTL_API ensctl_status ensctl_scenario_echo(const ensctl_scenario* s, char** yaml_out);
/* exit_code receives 0 (ok) or 2 (scientific failure). seed is used when has_seed != 0. */
ENSCTL_API ensctl_status ensctl_scenario_run(const ensctl_scenario* s, const char* out_dir, int has_seed,
                                             uint64_t seed, int threads, int* exit_code, char** message_out);

/* Polynomial vector fields over x1..x_dim; theta may be NULL or a rational literal. */
ENSCTL_API ensctl_status ensctl_field_parse(const char* const* components, size_t dim, const char* theta,
                                            ensctl_field** out);
ENSCTL_API void ensctl_field_free(ensctl_field* f);
ENSCTL_API size_t ensctl_field_dim(const ensctl_field* f);
ENSCTL_API ensctl_status ensctl_field_bracket(const ensctl_field* x, const ensctl_field* y, ensctl_field** out);
ENSCTL_API ensctl_status ensctl_field_eval(const ensctl_field* f, const double* x, double* out);
ENSCTL_API ensctl_status ensctl_field_divergence_is_zero(const ensctl_field* f, int* out);
ENSCTL_API ensctl_status ensctl_field_to_string(const ensctl_field* f, char** out);

/* Expressions in x and theta. */
ENSCTL_API ensctl_status ensctl_expr_parse(const char* src, ensctl_expr** out);
ENSCTL_API void ensctl_expr_free(ensctl_expr* e);
ENSCTL_API ensctl_status ensctl_expr_eval(const ensctl_expr* e, double x, double theta, double* out);
/* Writes a_0..a_M into coeffs (length M + 1). */
ENSCTL_API ensctl_status ensctl_expr_taylor(const ensctl_expr* e, double theta, int M, double* coeffs);
ENSCTL_API ensctl_status ensctl_expr_serialize(const ensctl_expr* e, char** out);

/* Rigid bodies: J holds N principal triples, L the torque axis. */
ENSCTL_API ensctl_status ensctl_rigid_rn(const double* J, size_t N, const double* L, int exact, double* det,
                                         double* measure, ensctl_verdict* verdict);

#ifdef __cplusplus
}
#endif

#endif
