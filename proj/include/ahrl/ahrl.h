#ifndef AHRL_AHRL_H
#define AHRL_AHRL_H

/* C interface to the affinity-regularized hierarchical RL library.
 *
 * Every function returning ahrl_status sets a thread-local message readable
 * through ahrl_last_error() on failure. Handles are opaque and owned by the
 * caller; release them with the matching *_free function (NULL is accepted).
 * String getters follow the snprintf convention: `needed` receives the length
 * without the terminator and the buffer may be NULL when `capacity` is 0.
 */

#include <stddef.h>

#if defined(_WIN32)
#define AHRL_API __declspec(dllexport)
#elif defined(__GNUC__)
#define AHRL_API __attribute__((visibility("default")))
#else
#define AHRL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ahrl_status {
  AHRL_OK = 0,
  AHRL_INVALID_ARGUMENT = 1, /* bad key, value, trait name or NULL handle */
  AHRL_DATA = 2,             /* unreadable or malformed file */
  AHRL_NUMERIC = 3,          /* divergence or singular system */
  AHRL_STATE = 4,            /* operation not valid for this handle */
  AHRL_INTERNAL = 5
} ahrl_status;

typedef struct ahrl_config ahrl_config;
typedef struct ahrl_series ahrl_series;
typedef struct ahrl_agent ahrl_agent;
typedef struct ahrl_customers ahrl_customers;
typedef struct ahrl_comparison ahrl_comparison;
typedef struct ahrl_personality ahrl_personality;

#define AHRL_TRAITS 5

AHRL_API const char* ahrl_version(void);
AHRL_API const char* ahrl_status_name(ahrl_status status);
AHRL_API const char* ahrl_last_error(void);

/* Run configuration: flat `key = value` text, see ahrl_config_dump for keys. */
AHRL_API ahrl_status ahrl_config_create(ahrl_config** out);
AHRL_API void ahrl_config_free(ahrl_config* config);
AHRL_API ahrl_status ahrl_config_merge_file(ahrl_config* config, const char* path);
AHRL_API ahrl_status ahrl_config_set(ahrl_config* config, const char* key, const char* value);
AHRL_API ahrl_status ahrl_config_get(const ahrl_config* config, const char* key, char* buffer, size_t capacity,
                                     size_t* needed);
AHRL_API ahrl_status ahrl_config_dump(const ahrl_config* config, char* buffer, size_t capacity, size_t* needed);

/* Price series */
AHRL_API ahrl_status ahrl_series_generate(const ahrl_config* config, ahrl_series** out);
AHRL_API ahrl_status ahrl_series_load(const char* path, ahrl_series** out);
AHRL_API ahrl_status ahrl_series_save(const ahrl_series* series, const char* path);
AHRL_API size_t ahrl_series_months(const ahrl_series* series);
AHRL_API void ahrl_series_free(ahrl_series* series);

/* Agents. A freshly trained agent carries its training log; a loaded one does not. */
AHRL_API ahrl_status ahrl_prototype_train(const ahrl_config* config, const ahrl_series* series, const char* trait,
                                          ahrl_agent** out);
/* out[i] follows trait order openness..neuroticism; uses the `threads` key. */
AHRL_API ahrl_status ahrl_prototype_train_all(const ahrl_config* config, const ahrl_series* series,
                                              ahrl_agent* out[AHRL_TRAITS]);
AHRL_API ahrl_status ahrl_agent_load(const char* path, ahrl_agent** out);
AHRL_API ahrl_status ahrl_agent_save(const ahrl_agent* agent, const char* path);
AHRL_API ahrl_status ahrl_agent_write_log(const ahrl_agent* agent, const char* path);
/* Noise-free per-month allocations of a prototype on `series`. */
AHRL_API ahrl_status ahrl_agent_write_schedule(const ahrl_agent* agent, const ahrl_series* series,
                                               const ahrl_config* config, const char* path);
AHRL_API ahrl_status ahrl_agent_label(const ahrl_agent* agent, char* buffer, size_t capacity, size_t* needed);
AHRL_API ahrl_status ahrl_agent_prior(const ahrl_agent* agent, double out[AHRL_TRAITS]);
AHRL_API void ahrl_agent_free(ahrl_agent* agent);

/* Customers: personality CSV with header
 * customer_id,openness,conscientiousness,extraversion,agreeableness,neuroticism */
AHRL_API ahrl_status ahrl_customers_load(const char* path, ahrl_customers** out);
AHRL_API ahrl_status ahrl_customers_acceptance(ahrl_customers** out);
AHRL_API size_t ahrl_customers_count(const ahrl_customers* customers);
AHRL_API ahrl_status ahrl_customers_id(const ahrl_customers* customers, size_t index, char* buffer, size_t capacity,
                                       size_t* needed);
/* Gives every customer a behavioural feature: the final personality-model state
 * over a synthetic transaction history drawn from its personality. */
AHRL_API ahrl_status ahrl_customers_attach_behavior(ahrl_customers* customers, const ahrl_personality* model,
                                                    const ahrl_config* config);
AHRL_API void ahrl_customers_free(ahrl_customers* customers);

/* Orchestration */
AHRL_API ahrl_status ahrl_orchestrator_train(const ahrl_config* config, const ahrl_series* series,
                                             const ahrl_customers* customers, size_t index,
                                             ahrl_agent* const prototypes[AHRL_TRAITS], ahrl_agent** out);
/* orchestrators[i] must belong to customer i. */
AHRL_API ahrl_status ahrl_compare(const ahrl_config* config, const ahrl_series* series,
                                  const ahrl_customers* customers, ahrl_agent* const* orchestrators,
                                  ahrl_agent* const prototypes[AHRL_TRAITS], ahrl_comparison** out);
AHRL_API size_t ahrl_comparison_count(const ahrl_comparison* comparison);
/* out: orch_value_nok, orch_satisfaction, linear_value_nok, linear_satisfaction */
AHRL_API ahrl_status ahrl_comparison_row(const ahrl_comparison* comparison, size_t index, double out[4]);
AHRL_API ahrl_status ahrl_comparison_write(const ahrl_comparison* comparison, const char* path);
AHRL_API ahrl_status ahrl_comparison_write_strategy(const ahrl_comparison* comparison, size_t index,
                                                    const char* path);
AHRL_API void ahrl_comparison_free(ahrl_comparison* comparison);

/* Personality model and state-space analysis */
AHRL_API ahrl_status ahrl_personality_train_synthetic(const ahrl_config* config, ahrl_personality** out,
                                                      double* test_accuracy);
AHRL_API ahrl_status ahrl_personality_load(const char* path, ahrl_personality** out);
AHRL_API ahrl_status ahrl_personality_save(const ahrl_personality* model, const char* path);
/* Writes attractors and converged trajectories of synthetic test customers.
 * labeling_rate (may be NULL) receives the fraction landing nearest the
 * attractor of their dominant trait. */
AHRL_API ahrl_status ahrl_attractors_export(const ahrl_personality* model, const ahrl_config* config,
                                            const char* attractor_path, const char* trajectory_path,
                                            double* labeling_rate);
AHRL_API void ahrl_personality_free(ahrl_personality* model);

#ifdef __cplusplus
}
#endif

#endif
