/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "d2dcache/d2dcache.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s (last error: %s)\n", \
              __FILE__, __LINE__, #cond, d2dc_last_error());           \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static void channel_calls(void) {
  d2dc_radio rp;
  double g = 0.0, q = 0.0, p = 0.0;
  d2dc_radio_defaults(&rp);
  EXPECT(rp.d2d_tx_power_dbm == 20.0);
  EXPECT(d2dc_pathgain(10.0, &rp, &g) == D2DC_OK);
  EXPECT(fabs(g - 1.4248e-6) < 1e-9);
  EXPECT(d2dc_link_prob_case3(80.0, &rp, &q) == D2DC_OK);
  EXPECT(q > 0.0 && q < 1.0);
  EXPECT(d2dc_power_control_dbm(90.0, &rp, 16.0, &p) == D2DC_OK);
  EXPECT(p <= 20.0);
  EXPECT(d2dc_link_prob_case3(-1.0, &rp, &q) == D2DC_ERR_PARAMETER);
  EXPECT(strlen(d2dc_last_error()) > 0);
  EXPECT(strcmp(d2dc_status_name(D2DC_ERR_PARAMETER), "parameter") == 0);
}

static void design_calls(void) {
  const double a[] = {1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  const double links[] = {1.0, 1.0, 1.0, 1.0};
  const size_t active[] = {0, 1};
  d2dc_radio rp;
  d2dc_metric_constants mc;
  double triple[3], u = 0.0, t_star = 0.0, entries[8];
  d2dc_preferences* prefs = NULL;
  d2dc_instance* inst = NULL;
  d2dc_policy* policy = NULL;
  d2dc_policy* ee_policy = NULL;
  d2dc_metrics m;
  d2dc_sim_estimate rnd, pri;
  size_t users = 0, files = 0, rounds = 0;
  int converged = 0;

  d2dc_radio_defaults(&rp);
  EXPECT(d2dc_metric_constants_default(&rp, 2.0, &mc) == D2DC_OK);
  EXPECT(d2dc_objective("hitrate", &mc, 2, triple) == D2DC_OK);
  EXPECT(triple[0] == 0.0 && triple[1] == 1.0 && triple[2] == 0.5);
  EXPECT(d2dc_objective("fastest", &mc, 2, triple) == D2DC_ERR_PARAMETER);
  EXPECT(d2dc_objective("hitrate", &mc, 2, triple) == D2DC_OK);

  EXPECT(d2dc_preferences_create(2, 4, a, &prefs) == D2DC_OK);
  EXPECT(d2dc_instance_create(prefs, active, 2, NULL, 1, links, triple, &inst) == D2DC_OK);
  EXPECT(d2dc_optimize(inst, 0, 0, &policy, &rounds, &converged) == D2DC_OK);
  EXPECT(converged == 1);
  EXPECT(d2dc_policy_get(policy, &users, &files, NULL) == D2DC_OK);
  EXPECT(users == 2 && files == 4);
  EXPECT(d2dc_policy_get(policy, &users, &files, entries) == D2DC_OK);
  EXPECT(entries[0] == 1.0 && entries[5] == 1.0);
  EXPECT(d2dc_expected_utility(inst, policy, &u) == D2DC_OK);
  EXPECT(u == 1.0);
  EXPECT(d2dc_evaluate_metrics(inst, policy, &mc, &m) == D2DC_OK);
  EXPECT(m.hit_rate == 1.0);
  EXPECT(d2dc_simulate_instance(inst, policy, &mc, 1000, 1, 1, &rnd, &pri) == D2DC_OK);
  EXPECT(rnd.hit_rate.mean == 1.0);
  EXPECT(rnd.realizations == 1000);
  EXPECT(d2dc_optimize_ee(inst, &mc, 1e-6, &ee_policy, &t_star) == D2DC_OK);
  EXPECT(t_star > 0.0);

  d2dc_policy_free(ee_policy);
  d2dc_policy_free(policy);
  d2dc_instance_free(inst);
  d2dc_preferences_free(prefs);
  d2dc_preferences_free(NULL);
}

static void experiment_calls(void) {
  const char* json =
      "{\"sweep\": {\"values\": [3]}, \"designs\": [\"throughput\", \"selfish\"],"
      " \"preferences\": {\"pool_users\": 50, \"files\": 30}, \"cache.size\": 2,"
      " \"experiment.instances\": 2}";
  d2dc_config* cfg = NULL;
  d2dc_config* bad = NULL;
  d2dc_table* table = NULL;
  size_t needed = 0;
  char* text = NULL;
  char tiny[4];

  EXPECT(d2dc_config_parse(json, &cfg) == D2DC_OK);
  EXPECT(d2dc_config_set_seed(cfg, 9) == D2DC_OK);
  EXPECT(d2dc_config_set_jobs(cfg, 0) == D2DC_ERR_CONFIG);
  EXPECT(d2dc_run_table(cfg, "sweep-users", &table) == D2DC_OK);
  EXPECT(d2dc_table_rows(table) == 2);
  EXPECT(d2dc_table_columns(table) > 10);
  EXPECT(d2dc_table_csv(table, NULL, 0, &needed) == D2DC_OK);
  EXPECT(needed > 1);
  EXPECT(d2dc_table_csv(table, tiny, sizeof tiny, &needed) == D2DC_ERR_RANGE);
  text = (char*)malloc(needed);
  EXPECT(d2dc_table_csv(table, text, needed, &needed) == D2DC_OK);
  EXPECT(strncmp(text, "sweep_variable,", 15) == 0);
  free(text);
  d2dc_table_free(table);

  EXPECT(d2dc_config_parse("{\"cache.size\": -3}", &bad) == D2DC_ERR_CONFIG);
  EXPECT(bad == NULL);
  EXPECT(d2dc_config_load("/nonexistent.json", &bad) != D2DC_OK);
  EXPECT(d2dc_run_table(cfg, "nope", &table) != D2DC_OK);
  d2dc_config_free(cfg);
}

int main(void) {
  EXPECT(strlen(d2dc_version()) > 0);
  channel_calls();
  design_calls();
  experiment_calls();
  if (failures) {
    fprintf(stderr, "%d expectation(s) failed\n", failures);
    return 1;
  }
  printf("C API smoke test passed\n");
  return 0;
}
