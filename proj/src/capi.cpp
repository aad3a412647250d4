#include "d2dcache/d2dcache.h"

#include <cstring>
#include <iostream>
#include <new>
#include <sstream>
#include <string>

#include "d2dcache/channel.hpp"
#include "d2dcache/error.hpp"
#include "d2dcache/harness.hpp"
#include "d2dcache/optimizer.hpp"
#include "d2dcache/preference.hpp"
#include "d2dcache/simulator.hpp"

using namespace d2dcache;

struct d2dc_preferences {
  PreferenceMatrix value;
};
struct d2dc_instance {
  ClusterInstance value;
};
struct d2dc_policy {
  CachingPolicy value;
};
struct d2dc_config {
  ExperimentConfig value;
};
struct d2dc_table {
  ResultTable value;
};

namespace {

thread_local std::string g_last_error;

d2dc_status status_of(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::parameter: return D2DC_ERR_PARAMETER;
    case ErrorCategory::domain: return D2DC_ERR_DOMAIN;
    case ErrorCategory::numerical: return D2DC_ERR_NUMERICAL;
    case ErrorCategory::range: return D2DC_ERR_RANGE;
    case ErrorCategory::io: return D2DC_ERR_IO;
    case ErrorCategory::config: return D2DC_ERR_CONFIG;
    case ErrorCategory::internal: return D2DC_ERR_INTERNAL;
  }
  return D2DC_ERR_INTERNAL;
}

d2dc_status fail(d2dc_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

// No exception crosses the C boundary.
template <class Body>
d2dc_status guarded(Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    return fail(status_of(e.category()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(D2DC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(D2DC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(D2DC_ERR_INTERNAL, "unknown exception");
  }
}

template <class T>
void require(const T* p, const char* what) {
  if (!p) throw ParameterError(std::string(what) + " must not be NULL");
}

RadioParams to_radio(const d2dc_radio* r) {
  RadioParams rp;
  if (!r) return rp;
  rp.carrier_freq_hz = r->carrier_freq_hz;
  rp.breakpoint_d0_m = r->breakpoint_d0_m;
  rp.pathloss_exponent_alpha = r->pathloss_exponent_alpha;
  rp.shadow_mu_db = r->shadow_mu_db;
  rp.shadow_sigma_db = r->shadow_sigma_db;
  rp.noise_psd_dbm_hz = r->noise_psd_dbm_hz;
  rp.d2d_bandwidth_hz = r->d2d_bandwidth_hz;
  rp.bs_bandwidth_hz = r->bs_bandwidth_hz;
  rp.d2d_tx_power_dbm = r->d2d_tx_power_dbm;
  rp.bs_tx_power_dbm = r->bs_tx_power_dbm;
  rp.min_snr_db = r->min_snr_db;
  rp.validate();
  return rp;
}

MetricConstants to_constants(const d2dc_metric_constants* m) {
  require(m, "metric constants");
  MetricConstants mc;
  mc.t_b = m->t_b;
  mc.t_d = m->t_d;
  mc.t_s = m->t_s;
  mc.c_b = m->c_b;
  mc.c_d = m->c_d;
  mc.c_s = m->c_s;
  mc.validate();
  return mc;
}

Matrix matrix_from(std::size_t rows, std::size_t cols, const double* entries) {
  if (rows * cols > 0) require(entries, "entries");
  Matrix m(rows, cols);
  if (rows * cols > 0) std::memcpy(m.data().data(), entries, rows * cols * sizeof(double));
  return m;
}

void copy_matrix(const Matrix& m, std::size_t* rows, std::size_t* cols, double* out) {
  if (rows) *rows = m.rows();
  if (cols) *cols = m.cols();
  if (out && !m.empty()) std::memcpy(out, m.data().data(), m.rows() * m.cols() * sizeof(double));
}

d2dc_sim_estimate to_c(const SimulationEstimate& e) {
  auto c = [](const Estimate& x) { return d2dc_estimate{x.mean, x.se}; };
  return {c(e.throughput), c(e.area_throughput), c(e.energy), c(e.ee), c(e.hit_rate),
          e.realizations};
}

}  // namespace

extern "C" {

const char* d2dc_version(void) { return "0.1.0"; }

const char* d2dc_status_name(d2dc_status status) {
  switch (status) {
    case D2DC_OK: return "ok";
    case D2DC_ERR_INTERNAL: return "internal";
    case D2DC_ERR_PARAMETER: return "parameter";
    case D2DC_ERR_DOMAIN: return "domain";
    case D2DC_ERR_NUMERICAL: return "numerical";
    case D2DC_ERR_RANGE: return "range";
    case D2DC_ERR_IO: return "io";
    case D2DC_ERR_CONFIG: return "config";
    case D2DC_VALIDATION_FAILED: return "validation";
  }
  return "unknown";
}

const char* d2dc_last_error(void) { return g_last_error.c_str(); }

d2dc_status d2dc_preferences_generate(size_t users, size_t files, double zipf_exponent,
                                      double mixing_weight, double rank_strength, uint64_t seed,
                                      d2dc_preferences** out) {
  return guarded([&] {
    require(out, "out");
    GeneratorParams g{zipf_exponent, mixing_weight, rank_strength, seed};
    *out = new d2dc_preferences{generate_preferences(users, files, g)};
    return D2DC_OK;
  });
}

d2dc_status d2dc_preferences_create(size_t users, size_t files, const double* entries,
                                    d2dc_preferences** out) {
  return guarded([&] {
    require(out, "out");
    *out = new d2dc_preferences{PreferenceMatrix(matrix_from(users, files, entries))};
    return D2DC_OK;
  });
}

d2dc_status d2dc_preferences_get(const d2dc_preferences* prefs, size_t* users, size_t* files,
                                 double* entries) {
  return guarded([&] {
    require(prefs, "prefs");
    copy_matrix(prefs->value.entries(), users, files, entries);
    return D2DC_OK;
  });
}

void d2dc_preferences_free(d2dc_preferences* prefs) { delete prefs; }

void d2dc_radio_defaults(d2dc_radio* out) {
  if (!out) return;
  const RadioParams rp;
  *out = {rp.carrier_freq_hz,  rp.breakpoint_d0_m,  rp.pathloss_exponent_alpha,
          rp.shadow_mu_db,     rp.shadow_sigma_db,  rp.noise_psd_dbm_hz,
          rp.d2d_bandwidth_hz, rp.bs_bandwidth_hz,  rp.d2d_tx_power_dbm,
          rp.bs_tx_power_dbm,  rp.min_snr_db};
}

d2dc_status d2dc_pathgain(double distance_m, const d2dc_radio* radio, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = pathgain(distance_m, to_radio(radio));
    return D2DC_OK;
  });
}

d2dc_status d2dc_link_prob_case3(double side_m, const d2dc_radio* radio, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = link_prob_case3(side_m, to_radio(radio));
    return D2DC_OK;
  });
}

d2dc_status d2dc_power_control_dbm(double side_m, const d2dc_radio* radio, double reuse_factor,
                                   double* out) {
  return guarded([&] {
    require(out, "out");
    *out = power_control_dbm(side_m, to_radio(radio), reuse_factor);
    return D2DC_OK;
  });
}

d2dc_status d2dc_metric_constants_default(const d2dc_radio* radio, double self_factor,
                                          d2dc_metric_constants* out) {
  return guarded([&] {
    require(out, "out");
    const MetricConstants mc = default_metric_constants(to_radio(radio), self_factor);
    mc.validate();
    *out = {mc.t_b, mc.t_d, mc.t_s, mc.c_b, mc.c_d, mc.c_s};
    return D2DC_OK;
  });
}

d2dc_status d2dc_objective(const char* name, const d2dc_metric_constants* mc,
                           size_t active_users, double out_triple[3]) {
  return guarded([&] {
    require(name, "name");
    require(out_triple, "out_triple");
    const ObjectiveSpec spec = parse_objective(name);
    if (spec.kind == ObjectiveKind::ee)
      throw ParameterError("the ee objective has no fixed utility triple; use d2dc_optimize_ee");
    const UtilityTriple u = make_objective(spec, to_constants(mc), active_users);
    out_triple[0] = u.u_b;
    out_triple[1] = u.u_d;
    out_triple[2] = u.u_s;
    return D2DC_OK;
  });
}

d2dc_status d2dc_instance_create(const d2dc_preferences* prefs, const size_t* active,
                                 size_t active_count, const double* weights, size_t cache_size,
                                 const double* links, const double utility[3],
                                 d2dc_instance** out) {
  return guarded([&] {
    require(prefs, "prefs");
    require(out, "out");
    require(utility, "utility");
    if (active_count > 0) require(active, "active");
    const std::size_t k = prefs->value.users();
    std::vector<std::size_t> act(active, active + active_count);
    std::vector<double> w;
    if (weights) w.assign(weights, weights + active_count);
    LinkProbabilityMatrix l(matrix_from(k, k, links));
    *out = new d2dc_instance{ClusterInstance(prefs->value, std::move(act), std::move(w),
                                             cache_size, std::move(l),
                                             {utility[0], utility[1], utility[2]})};
    return D2DC_OK;
  });
}

void d2dc_instance_free(d2dc_instance* inst) { delete inst; }

d2dc_status d2dc_policy_create(size_t users, size_t files, const double* entries,
                               size_t cache_size, d2dc_policy** out) {
  return guarded([&] {
    require(out, "out");
    *out = new d2dc_policy{CachingPolicy(matrix_from(users, files, entries), cache_size)};
    return D2DC_OK;
  });
}

d2dc_status d2dc_policy_get(const d2dc_policy* policy, size_t* users, size_t* files,
                            double* entries) {
  return guarded([&] {
    require(policy, "policy");
    copy_matrix(policy->value.entries(), users, files, entries);
    return D2DC_OK;
  });
}

void d2dc_policy_free(d2dc_policy* policy) { delete policy; }

d2dc_status d2dc_expected_utility(const d2dc_instance* inst, const d2dc_policy* policy,
                                  double* out) {
  return guarded([&] {
    require(inst, "inst");
    require(policy, "policy");
    require(out, "out");
    *out = expected_utility(inst->value, policy->value);
    return D2DC_OK;
  });
}

d2dc_status d2dc_evaluate_metrics(const d2dc_instance* inst, const d2dc_policy* policy,
                                  const d2dc_metric_constants* mc, d2dc_metrics* out) {
  return guarded([&] {
    require(inst, "inst");
    require(policy, "policy");
    require(out, "out");
    const NetworkMetrics m = evaluate_metrics(inst->value, policy->value, to_constants(mc));
    *out = {m.throughput, m.cost, m.hit_rate, m.ee};
    return D2DC_OK;
  });
}

d2dc_status d2dc_optimize(const d2dc_instance* inst, int init_selfish, size_t max_rounds,
                          d2dc_policy** out, size_t* rounds, int* converged) {
  return guarded([&] {
    require(inst, "inst");
    require(out, "out");
    OptimizeOptions options;
    options.max_rounds = max_rounds;
    const InitKind init = init_selfish ? InitKind::selfish : InitKind::zeros;
    OptimizerReport r = optimize(inst->value, initial_policy(inst->value, init), options);
    if (rounds) *rounds = r.rounds;
    if (converged) *converged = r.converged ? 1 : 0;
    *out = new d2dc_policy{std::move(r.policy)};
    return D2DC_OK;
  });
}

d2dc_status d2dc_optimize_ee(const d2dc_instance* inst, const d2dc_metric_constants* mc,
                             double tolerance, d2dc_policy** out, double* t_star) {
  return guarded([&] {
    require(inst, "inst");
    require(out, "out");
    EeOptions options;
    options.tolerance = tolerance;
    EeResult r = optimize_ee(inst->value, to_constants(mc), options);
    if (t_star) *t_star = r.t_star;
    *out = new d2dc_policy{std::move(r.report.policy)};
    return D2DC_OK;
  });
}

d2dc_status d2dc_simulate_instance(const d2dc_instance* inst, const d2dc_policy* policy,
                                   const d2dc_metric_constants* mc, size_t realizations,
                                   uint64_t seed, size_t jobs, d2dc_sim_estimate* random_push,
                                   d2dc_sim_estimate* priority_push) {
  return guarded([&] {
    require(inst, "inst");
    require(policy, "policy");
    InstanceSimulationOptions options{realizations, seed, jobs};
    const PairedEstimate e = simulate_instance(inst->value, policy->value, to_constants(mc), options);
    if (random_push) *random_push = to_c(e.random_push);
    if (priority_push) *priority_push = to_c(e.priority_push);
    return D2DC_OK;
  });
}

d2dc_status d2dc_config_default(d2dc_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new d2dc_config{};
    return D2DC_OK;
  });
}

d2dc_status d2dc_config_parse(const char* json_text, d2dc_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new d2dc_config{parse_config(json_text)};
    return D2DC_OK;
  });
}

d2dc_status d2dc_config_load(const char* path, d2dc_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new d2dc_config{load_config_file(path)};
    return D2DC_OK;
  });
}

d2dc_status d2dc_config_set_seed(d2dc_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->value.seed = seed;
    return D2DC_OK;
  });
}

d2dc_status d2dc_config_set_jobs(d2dc_config* cfg, size_t jobs) {
  return guarded([&] {
    require(cfg, "cfg");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    cfg->value.jobs = jobs;
    return D2DC_OK;
  });
}

void d2dc_config_free(d2dc_config* cfg) { delete cfg; }

d2dc_status d2dc_run_table(const d2dc_config* cfg, const char* command, d2dc_table** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(command, "command");
    require(out, "out");
    const std::string_view c(command);
    ResultTable t;
    d2dc_status status = D2DC_OK;
    if (c == "sweep-users") t = run_user_sweep(cfg->value);
    else if (c == "sweep-size") t = run_cluster_size_sweep(cfg->value);
    else if (c == "compare-schedulers") t = run_scheduler_compare(cfg->value);
    else if (c == "validate") {
      ValidationResult v = run_validation(cfg->value);
      t = std::move(v.table);
      if (!v.passed) status = D2DC_VALIDATION_FAILED;
    } else {
      throw ParameterError("no table for command '" + std::string(c) + "'");
    }
    *out = new d2dc_table{std::move(t)};
    if (status != D2DC_OK) return fail(status, "validation found violations");
    return status;
  });
}

d2dc_status d2dc_run_command(const d2dc_config* cfg, const char* command, const char* out_dir,
                             int progress) {
  return guarded([&] {
    require(cfg, "cfg");
    require(command, "command");
    require(out_dir, "out_dir");
    const bool passed = run_command(cfg->value, command, out_dir, progress ? &std::cerr : nullptr);
    if (!passed) return fail(D2DC_VALIDATION_FAILED, "validation found violations");
    return D2DC_OK;
  });
}

size_t d2dc_table_rows(const d2dc_table* table) { return table ? table->value.rows() : 0; }

size_t d2dc_table_columns(const d2dc_table* table) {
  return table ? table->value.columns().size() : 0;
}

d2dc_status d2dc_table_csv(const d2dc_table* table, char* buffer, size_t capacity,
                           size_t* needed) {
  return guarded([&] {
    require(table, "table");
    std::ostringstream os;
    table->value.write_csv(os);
    const std::string s = os.str();
    if (needed) *needed = s.size() + 1;
    if (!buffer) return D2DC_OK;
    if (capacity < s.size() + 1) {
      if (capacity > 0) buffer[0] = '\0';
      return fail(D2DC_ERR_RANGE, "buffer too small for table CSV");
    }
    std::memcpy(buffer, s.c_str(), s.size() + 1);
    return D2DC_OK;
  });
}

void d2dc_table_free(d2dc_table* table) { delete table; }

}  // extern "C"
