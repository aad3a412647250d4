/*
 * C interface of the d2dcache library.
 *
 * Every fallible call returns a d2dc_status. On failure the message of the
 * most recent error on the calling thread is available from
 * d2dc_last_error(). Objects are opaque handles owned by the caller and
 * released with the matching *_free function (NULL is accepted).
 *
 * Matrices cross the boundary as row-major double arrays. Variable-size
 * outputs use a two-call pattern: pass NULL to learn the size, then a buffer.
 */
#ifndef D2DCACHE_H
#define D2DCACHE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define D2DC_API __declspec(dllexport)
#elif defined(__GNUC__)
#define D2DC_API __attribute__((visibility("default")))
#else
#define D2DC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum d2dc_status {
  D2DC_OK = 0,
  D2DC_ERR_INTERNAL = 1,
  D2DC_ERR_PARAMETER = 2,
  D2DC_ERR_DOMAIN = 3,
  D2DC_ERR_NUMERICAL = 4,
  D2DC_ERR_RANGE = 5,
  D2DC_ERR_IO = 6,
  D2DC_ERR_CONFIG = 7,
  D2DC_VALIDATION_FAILED = 8
} d2dc_status;

typedef struct d2dc_preferences d2dc_preferences;
typedef struct d2dc_instance d2dc_instance;
typedef struct d2dc_policy d2dc_policy;
typedef struct d2dc_config d2dc_config;
typedef struct d2dc_table d2dc_table;

typedef struct d2dc_radio {
  double carrier_freq_hz;
  double breakpoint_d0_m;
  double pathloss_exponent_alpha;
  double shadow_mu_db;
  double shadow_sigma_db;
  double noise_psd_dbm_hz;
  double d2d_bandwidth_hz;
  double bs_bandwidth_hz;
  double d2d_tx_power_dbm;
  double bs_tx_power_dbm;
  double min_snr_db;
} d2dc_radio;

typedef struct d2dc_metric_constants {
  double t_b, t_d, t_s; /* bits/s */
  double c_b, c_d, c_s; /* W */
} d2dc_metric_constants;

typedef struct d2dc_metrics {
  double throughput;
  double cost;
  double hit_rate;
  double ee; /* +inf when cost is zero */
} d2dc_metrics;

typedef struct d2dc_estimate {
  double mean;
  double se;
} d2dc_estimate;

typedef struct d2dc_sim_estimate {
  d2dc_estimate throughput;
  d2dc_estimate area_throughput;
  d2dc_estimate energy;
  d2dc_estimate ee;
  d2dc_estimate hit_rate;
  size_t realizations;
} d2dc_sim_estimate;

D2DC_API const char* d2dc_version(void);
D2DC_API const char* d2dc_status_name(d2dc_status status);
/* Message of the last failed call on this thread; "" if none. */
D2DC_API const char* d2dc_last_error(void);

/* ---- preferences ---- */
D2DC_API d2dc_status d2dc_preferences_generate(size_t users, size_t files, double zipf_exponent,
                                               double mixing_weight, double rank_strength,
                                               uint64_t seed, d2dc_preferences** out);
D2DC_API d2dc_status d2dc_preferences_create(size_t users, size_t files, const double* entries,
                                             d2dc_preferences** out);
D2DC_API d2dc_status d2dc_preferences_get(const d2dc_preferences* prefs, size_t* users,
                                          size_t* files, double* entries);
D2DC_API void d2dc_preferences_free(d2dc_preferences* prefs);

/* ---- channel ---- */
D2DC_API void d2dc_radio_defaults(d2dc_radio* out);
D2DC_API d2dc_status d2dc_pathgain(double distance_m, const d2dc_radio* radio, double* out);
D2DC_API d2dc_status d2dc_link_prob_case3(double side_m, const d2dc_radio* radio, double* out);
D2DC_API d2dc_status d2dc_power_control_dbm(double side_m, const d2dc_radio* radio,
                                            double reuse_factor, double* out);

/* ---- objectives ---- */
D2DC_API d2dc_status d2dc_metric_constants_default(const d2dc_radio* radio, double self_factor,
                                                   d2dc_metric_constants* out);
/* name: throughput | cost | hitrate | tradeoff(z). Writes (u_b, u_d, u_s). */
D2DC_API d2dc_status d2dc_objective(const char* name, const d2dc_metric_constants* mc,
                                    size_t active_users, double out_triple[3]);

/* ---- instances and policies ---- */
/* weights may be NULL (all ones); links is users x users. */
D2DC_API d2dc_status d2dc_instance_create(const d2dc_preferences* prefs, const size_t* active,
                                          size_t active_count, const double* weights,
                                          size_t cache_size, const double* links,
                                          const double utility[3], d2dc_instance** out);
D2DC_API void d2dc_instance_free(d2dc_instance* inst);

D2DC_API d2dc_status d2dc_policy_create(size_t users, size_t files, const double* entries,
                                        size_t cache_size, d2dc_policy** out);
D2DC_API d2dc_status d2dc_policy_get(const d2dc_policy* policy, size_t* users, size_t* files,
                                     double* entries);
D2DC_API void d2dc_policy_free(d2dc_policy* policy);

D2DC_API d2dc_status d2dc_expected_utility(const d2dc_instance* inst, const d2dc_policy* policy,
                                           double* out);
D2DC_API d2dc_status d2dc_evaluate_metrics(const d2dc_instance* inst, const d2dc_policy* policy,
                                           const d2dc_metric_constants* mc, d2dc_metrics* out);
/* init_selfish: 0 starts from the empty policy. max_rounds 0 means 10 K.
 * rounds and converged may be NULL. */
D2DC_API d2dc_status d2dc_optimize(const d2dc_instance* inst, int init_selfish,
                                   size_t max_rounds, d2dc_policy** out, size_t* rounds,
                                   int* converged);
D2DC_API d2dc_status d2dc_optimize_ee(const d2dc_instance* inst, const d2dc_metric_constants* mc,
                                      double tolerance, d2dc_policy** out, double* t_star);
D2DC_API d2dc_status d2dc_simulate_instance(const d2dc_instance* inst, const d2dc_policy* policy,
                                            const d2dc_metric_constants* mc, size_t realizations,
                                            uint64_t seed, size_t jobs,
                                            d2dc_sim_estimate* random_push,
                                            d2dc_sim_estimate* priority_push);

/* ---- experiments ---- */
D2DC_API d2dc_status d2dc_config_default(d2dc_config** out);
D2DC_API d2dc_status d2dc_config_parse(const char* json_text, d2dc_config** out);
D2DC_API d2dc_status d2dc_config_load(const char* path, d2dc_config** out);
D2DC_API d2dc_status d2dc_config_set_seed(d2dc_config* cfg, uint64_t seed);
D2DC_API d2dc_status d2dc_config_set_jobs(d2dc_config* cfg, size_t jobs);
D2DC_API void d2dc_config_free(d2dc_config* cfg);

/* command: sweep-users | sweep-size | compare-schedulers | validate. */
D2DC_API d2dc_status d2dc_run_table(const d2dc_config* cfg, const char* command,
                                    d2dc_table** out);
/* Any subcommand, writing files into out_dir. progress != 0 logs to stderr.
 * Returns D2DC_VALIDATION_FAILED when `validate` finds a violation. */
D2DC_API d2dc_status d2dc_run_command(const d2dc_config* cfg, const char* command,
                                      const char* out_dir, int progress);

D2DC_API size_t d2dc_table_rows(const d2dc_table* table);
D2DC_API size_t d2dc_table_columns(const d2dc_table* table);
/* Writes at most capacity bytes including the terminator; *needed receives
 * the full size. D2DC_ERR_RANGE if the buffer is too small. */
D2DC_API d2dc_status d2dc_table_csv(const d2dc_table* table, char* buffer, size_t capacity,
                                    size_t* needed);
D2DC_API void d2dc_table_free(d2dc_table* table);

#ifdef __cplusplus
}
#endif

#endif /* D2DCACHE_H */
