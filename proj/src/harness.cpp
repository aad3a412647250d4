#include "d2dcache/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>

#include "d2dcache/baselines.hpp"
#include "d2dcache/csv.hpp"
#include "d2dcache/error.hpp"
#include "d2dcache/parallel.hpp"
#include "d2dcache/random.hpp"
#include "json.hpp"

namespace d2dcache {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ResultTable

ResultTable::ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

std::size_t ResultTable::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw ParameterError("no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

void ResultTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size())
    throw InternalError("row has " + std::to_string(cells.size()) + " cells, table has " +
                        std::to_string(columns_.size()) + " columns");
  cells_.push_back(std::move(cells));
}

const std::string& ResultTable::text(std::size_t row, std::string_view column) const {
  if (row >= cells_.size()) throw ParameterError("row index out of range");
  return cells_[row][column_index(column)];
}

double ResultTable::number(std::size_t row, std::string_view column) const {
  const std::string& cell = text(row, column);
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  return csv::parse_double(cell);
}

void ResultTable::write_csv(std::ostream& out) const {
  auto write_line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  write_line(columns_);
  for (const auto& row : cells_) write_line(row);
}

// ---------------------------------------------------------------------------
// Designs

DesignOutcome run_design(const DesignSpec& design, const ClusterInstance& inst,
                         const MetricConstants& mc, const GlobalPopularity& pop,
                         const DesignSettings& settings) {
  DesignOutcome out;
  if (design.base == DesignBase::selfish) {
    out.policy = selfish_policy(inst);
    out.report.policy = out.policy;
    out.report.converged = true;
    out.metrics = evaluate_metrics(inst, out.policy, mc);
    return out;
  }
  OptimizeOptions options;
  options.max_rounds = settings.max_rounds;

  const ClusterInstance design_inst = design.base == DesignBase::proposed
                                          ? inst
                                          : inst.with_preferences(homogenize(pop, inst.users()));
  const ClusterInstance& eval_inst = design.base == DesignBase::homogeneous ? design_inst : inst;

  if (design.objective.kind == ObjectiveKind::ee) {
    EeOptions eo;
    eo.tolerance = settings.ee_tolerance;
    eo.inner = options;
    eo.init = settings.init;
    EeResult r = optimize_ee(design_inst, mc, eo);
    out.report = std::move(r.report);
    out.t_star = r.t_star;
  } else {
    const ClusterInstance target = design_inst.with_utility(
        make_objective(design.objective, mc, design_inst.active_count()));
    out.report = optimize(target, initial_policy(target, settings.init), options);
  }
  out.policy = out.report.policy;
  out.metrics = evaluate_metrics(eval_inst, out.policy, mc);
  return out;
}

namespace {

// Stream ids under the global seed.
enum Stream : std::uint64_t {
  kPoolStream = 1,
  kClusterStream = 2,
  kDrawStream = 3,
  kCommandStream = 4,
  kValidateStream = 5,
};

std::string num(double v) { return csv::format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }

PreferenceMatrix make_pool(const ExperimentConfig& cfg) {
  GeneratorParams g = cfg.generator;
  g.seed = derive_seed(cfg.seed, {kPoolStream, cfg.generator.seed});
  return generate_preferences(cfg.pool_users, cfg.files, g);
}

struct PointSetup {
  double value = 0.0;
  ScenarioParams sp;
  MetricConstants mc;
};

bool poisson_counts(const ExperimentConfig& cfg, bool default_poisson) {
  if (cfg.counts.empty()) return default_poisson;
  return cfg.counts == "poisson";
}

PointSetup make_point(const ExperimentConfig& cfg, SweepVariable variable, double value) {
  PointSetup p;
  p.value = value;
  p.sp = cfg.scenario;
  p.sp.jobs = 1;
  if (variable == SweepVariable::active_users) {
    const auto ka = static_cast<std::size_t>(value);
    if (poisson_counts(cfg, false)) {
      const double area = p.sp.side_m * p.sp.side_m;
      p.sp.lambda_active = value / area;
      p.sp.lambda_inactive = static_cast<double>(cfg.inactive_users) / area;
      p.sp.fixed_counts.reset();
    } else {
      p.sp.fixed_counts = std::pair{ka, cfg.inactive_users};
    }
  } else {
    p.sp.side_m = value;
    p.sp.rp.d2d_tx_power_dbm = power_control_dbm(value, p.sp.rp, p.sp.reuse_factor);
    if (poisson_counts(cfg, true)) p.sp.fixed_counts.reset();
    else p.sp.fixed_counts = std::pair{cfg.active_users, cfg.inactive_users};
  }
  p.mc = default_metric_constants(p.sp.rp, cfg.self_factor);
  return p;
}

ClusterRealization with_homogeneous_preferences(ClusterRealization cluster,
                                                const GlobalPopularity& pop) {
  cluster.preferences = homogenize(pop, cluster.users());
  return cluster;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_text_file(path, buf.str());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_links_csv(std::ostream& out, const LinkProbabilityMatrix& links) {
  std::vector<std::string> header;
  for (std::size_t l = 0; l < links.users(); ++l) header.push_back("user_" + std::to_string(l));
  csv::write_matrix(out, header, links.entries());
}

// ---------------------------------------------------------------------------
// Sweep engine

struct DesignSample {
  NetworkMetrics metrics;
  std::size_t rounds = 0;
  bool converged = true;
  ClusterDrawResult sim;
};

struct TaskResult {
  std::size_t active = 0;
  std::size_t inactive = 0;
  std::vector<DesignSample> designs;  // empty for clusters without active users
};

struct PointAggregate {
  std::size_t instances = 0;
  std::size_t empty = 0;
  double active = 0, inactive = 0;
  double t = 0, c = 0, h = 0, rounds = 0;
  std::size_t optimized = 0, converged = 0;
  ClusterDrawResult sim;
  std::size_t pairs = 0, pairs_not_worse = 0;
};

struct SweepRun {
  std::vector<PointSetup> points;
  // [point][design]
  std::vector<std::vector<PointAggregate>> agg;
};

SweepRun run_sweep(const ExperimentConfig& cfg, SweepVariable variable, bool simulate,
                   ProgressLog log, const std::string& dump_dir, const char* label) {
  cfg.validate();
  SweepRun run;
  for (double v : cfg.sweep_values) run.points.push_back(make_point(cfg, variable, v));

  const PreferenceMatrix pool = make_pool(cfg);
  const GlobalPopularity pop = global_popularity(pool);
  std::vector<ClusterSampler> samplers;
  for (const auto& p : run.points) samplers.emplace_back(p.sp, pool);

  const std::size_t n_points = run.points.size();
  const std::size_t n_designs = cfg.designs.size();
  const std::size_t n_tasks = n_points * cfg.instances;
  if (log)
    *log << label << ": " << n_points << " point(s) x " << cfg.instances << " instance(s) x "
         << n_designs << " design(s)\n";

  fs::path dump;
  if (!dump_dir.empty()) {
    dump = fs::path(dump_dir) / "instances";
    ensure_dir(dump);
  }

  std::vector<TaskResult> results(n_tasks);
  std::mutex log_mutex;
  std::size_t done = 0;
  parallel_for(n_tasks, cfg.jobs, [&](std::size_t task) {
    const std::size_t p = task / cfg.instances, r = task % cfg.instances;
    const PointSetup& point = run.points[p];
    const ClusterRealization cluster = samplers[p].realize(derive_seed(cfg.seed, {kClusterStream, p, r}));
    TaskResult& out = results[task];
    out.active = cluster.active_count;
    out.inactive = cluster.inactive_count;
    if (cluster.active_count > 0) {
      const ClusterInstance inst =
          make_instance(cluster, cfg.cache_size, throughput_objective(point.mc));
      const std::string stem = "p" + std::to_string(p) + "_r" + std::to_string(r);
      if (!dump.empty()) {
        write_file(dump / (stem + "_preferences.csv"),
                   [&](std::ostream& o) { write_preferences_csv(o, cluster.preferences); });
        write_file(dump / (stem + "_links.csv"),
                   [&](std::ostream& o) { write_links_csv(o, cluster.links); });
      }
      for (std::size_t d = 0; d < n_designs; ++d) {
        const DesignSpec& design = cfg.designs[d];
        DesignOutcome o = run_design(design, inst, point.mc, pop, cfg.design_settings);
        DesignSample s;
        s.metrics = o.metrics;
        s.rounds = o.report.rounds;
        s.converged = o.report.converged;
        if (simulate) {
          const std::uint64_t draw_seed = derive_seed(cfg.seed, {kDrawStream, p, r});
          if (design.base == DesignBase::homogeneous)
            s.sim = simulate_cluster(with_homogeneous_preferences(cluster, pop), o.policy, point.mc,
                                     point.sp.rp, cfg.draws_per_instance, draw_seed);
          else
            s.sim = simulate_cluster(cluster, o.policy, point.mc, point.sp.rp,
                                     cfg.draws_per_instance, draw_seed);
        }
        if (!dump.empty())
          write_file(dump / (stem + "_d" + std::to_string(d) + "_policy.csv"),
                     [&](std::ostream& os) { write_policy_csv(os, o.policy); });
        out.designs.push_back(std::move(s));
      }
    }
    if (log) {
      std::lock_guard lock(log_mutex);
      ++done;
      if (done == n_tasks || done % std::max<std::size_t>(1, n_tasks / 10) == 0)
        *log << label << ": " << done << "/" << n_tasks << " instances\n";
    }
  });

  run.agg.assign(n_points, std::vector<PointAggregate>(n_designs));
  for (std::size_t task = 0; task < n_tasks; ++task) {
    const std::size_t p = task / cfg.instances;
    const TaskResult& tr = results[task];
    for (std::size_t d = 0; d < n_designs; ++d) {
      PointAggregate& a = run.agg[p][d];
      ++a.instances;
      a.active += static_cast<double>(tr.active);
      a.inactive += static_cast<double>(tr.inactive);
      if (tr.designs.empty()) {
        ++a.empty;
        if (simulate) {
          for (std::size_t i = 0; i < cfg.draws_per_instance; ++i) {
            a.sim.random_push.add(0, 0, 0, true);
            a.sim.priority_push.add(0, 0, 0, true);
            a.sim.gain.add(0);
          }
        }
        continue;
      }
      const DesignSample& s = tr.designs[d];
      a.t += s.metrics.throughput;
      a.c += s.metrics.cost;
      a.h += s.metrics.hit_rate;
      if (cfg.designs[d].base != DesignBase::selfish) {
        ++a.optimized;
        a.rounds += static_cast<double>(s.rounds);
        if (s.converged) ++a.converged;
      }
      if (simulate) {
        a.sim.random_push.merge(s.sim.random_push);
        a.sim.priority_push.merge(s.sim.priority_push);
        a.sim.gain.merge(s.sim.gain);
        const Estimate g = s.sim.gain.estimate();
        ++a.pairs;
        if (g.mean >= -3.0 * g.se) ++a.pairs_not_worse;
      }
    }
  }
  return run;
}

const char* variable_name(SweepVariable v) {
  return v == SweepVariable::active_users ? "active_users" : "cluster_size";
}

double ratio(double a, double b) {
  if (b > 0.0) return a / b;
  return a > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

std::vector<std::string> point_cells(SweepVariable v, const PointSetup& p, const DesignSpec& d,
                                     const PointAggregate& a) {
  const double n = static_cast<double>(a.instances);
  return {variable_name(v),       num(p.value),
          d.name(),               num(a.instances),
          num(a.empty),           num(a.active / n),
          num(a.inactive / n),    num(p.sp.side_m),
          num(p.sp.rp.d2d_tx_power_dbm)};
}

const std::vector<std::string> kPointColumns = {
    "sweep_variable", "sweep_value",         "design",  "instances",
    "empty_instances", "mean_active_users", "mean_inactive_users", "side_m",
    "d2d_tx_power_dbm"};

void append_estimate(std::vector<std::string>& cells, const SimulationEstimate& e) {
  for (const Estimate* x : {&e.throughput, &e.area_throughput, &e.energy, &e.ee, &e.hit_rate}) {
    cells.push_back(num(x->mean));
    cells.push_back(num(x->se));
  }
}

std::vector<std::string> estimate_columns(const std::string& prefix) {
  std::vector<std::string> cols;
  for (const char* name : {"throughput", "area_throughput", "energy", "ee", "hit_rate"}) {
    cols.push_back(prefix + name);
    cols.push_back(prefix + name + "_se");
  }
  return cols;
}

ResultTable sweep_table(const ExperimentConfig& cfg, SweepVariable variable, const SweepRun& run) {
  std::vector<std::string> cols = kPointColumns;
  for (const char* c : {"t_net", "c_net", "h_net", "ee_net", "area_t_net", "mean_rounds",
                        "converged_fraction", "sim_realizations"})
    cols.emplace_back(c);
  for (auto& c : estimate_columns("sim_")) cols.push_back(std::move(c));
  ResultTable table(cols);

  for (std::size_t p = 0; p < run.points.size(); ++p) {
    const PointSetup& point = run.points[p];
    for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
      const PointAggregate& a = run.agg[p][d];
      const double n = static_cast<double>(a.instances);
      std::vector<std::string> cells = point_cells(variable, point, cfg.designs[d], a);
      cells.push_back(num(a.t / n));
      cells.push_back(num(a.c / n));
      cells.push_back(num(a.h / n));
      cells.push_back(num(ratio(a.t, a.c)));
      cells.push_back(num(a.t / n / (point.sp.side_m * point.sp.side_m)));
      const bool optimized = a.optimized > 0;
      cells.push_back(optimized ? num(a.rounds / static_cast<double>(a.optimized)) : "");
      cells.push_back(optimized ? num(static_cast<double>(a.converged) /
                                      static_cast<double>(a.optimized))
                                : "");
      if (cfg.simulate) {
        const auto& acc = cfg.scenario.scheduler == Scheduler::random_push ? a.sim.random_push
                                                                           : a.sim.priority_push;
        const SimulationEstimate e = acc.estimate(point.sp.side_m);
        cells.push_back(num(e.realizations));
        append_estimate(cells, e);
      } else {
        cells.insert(cells.end(), 11, "");
      }
      table.add_row(std::move(cells));
    }
  }
  return table;
}

}  // namespace

ResultTable run_user_sweep(const ExperimentConfig& cfg, ProgressLog log,
                           const std::string& dump_dir) {
  if (cfg.sweep_variable != SweepVariable::active_users)
    throw ConfigError("sweep-users needs sweep.variable = active_users");
  SweepRun run = run_sweep(cfg, SweepVariable::active_users, cfg.simulate, log, dump_dir,
                           "sweep-users");
  return sweep_table(cfg, SweepVariable::active_users, run);
}

ResultTable run_cluster_size_sweep(const ExperimentConfig& cfg, ProgressLog log,
                                   const std::string& dump_dir) {
  if (cfg.sweep_variable != SweepVariable::cluster_size)
    throw ConfigError("sweep-size needs sweep.variable = cluster_size");
  SweepRun run = run_sweep(cfg, SweepVariable::cluster_size, cfg.simulate, log, dump_dir,
                           "sweep-size");
  return sweep_table(cfg, SweepVariable::cluster_size, run);
}

ResultTable run_scheduler_compare(const ExperimentConfig& cfg, ProgressLog log) {
  SweepRun run = run_sweep(cfg, cfg.sweep_variable, true, log, {}, "compare-schedulers");
  std::vector<std::string> cols = kPointColumns;
  cols.emplace_back("sim_realizations");
  for (auto& c : estimate_columns("random_")) cols.push_back(std::move(c));
  for (auto& c : estimate_columns("priority_")) cols.push_back(std::move(c));
  for (const char* c : {"throughput_gain", "throughput_gain_se", "hit_rate_diff", "pairs",
                        "pairs_priority_not_worse"})
    cols.emplace_back(c);
  ResultTable table(cols);
  for (std::size_t p = 0; p < run.points.size(); ++p) {
    const PointSetup& point = run.points[p];
    for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
      const PointAggregate& a = run.agg[p][d];
      std::vector<std::string> cells = point_cells(cfg.sweep_variable, point, cfg.designs[d], a);
      const SimulationEstimate rnd = a.sim.random_push.estimate(point.sp.side_m);
      const SimulationEstimate pri = a.sim.priority_push.estimate(point.sp.side_m);
      cells.push_back(num(rnd.realizations));
      append_estimate(cells, rnd);
      append_estimate(cells, pri);
      const Estimate gain = a.sim.gain.estimate();
      cells.push_back(num(gain.mean));
      cells.push_back(num(gain.se));
      cells.push_back(num(pri.hit_rate.mean - rnd.hit_rate.mean));
      cells.push_back(num(a.pairs));
      cells.push_back(num(a.pairs_not_worse));
      table.add_row(std::move(cells));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Validation suite

namespace {

struct CheckTally {
  std::string name;
  double tolerance = 0.0;
  std::size_t cases = 0;
  std::size_t failed = 0;
  double worst = 0.0;

  void record(double violation) {
    ++cases;
    worst = std::max(worst, violation);
    if (!(violation <= tolerance)) ++failed;
  }
};

ClusterInstance random_small_instance(Rng& rng, const MetricConstants& mc, std::size_t variant) {
  const std::size_t k = 2 + uniform_index(rng, 4);
  const std::size_t ka = 1 + uniform_index(rng, k);
  const std::size_t m = 3 + uniform_index(rng, 6);
  const std::size_t s = 1 + uniform_index(rng, std::min<std::size_t>(2, m - 1));
  Matrix a(k, m);
  for (std::size_t u = 0; u < k; ++u) {
    double sum = 0.0;
    for (std::size_t f = 0; f < m; ++f) sum += (a(u, f) = 0.01 + uniform01(rng));
    for (std::size_t f = 0; f < m; ++f) a(u, f) /= sum;
  }
  Matrix l(k, k, 1.0);
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t v = 0; v < k; ++v)
      if (u != v) l(u, v) = uniform01(rng);
  std::vector<std::size_t> users(k);
  for (std::size_t u = 0; u < k; ++u) users[u] = u;
  std::shuffle(users.begin(), users.end(), rng);
  users.resize(ka);
  UtilityTriple utility = variant % 3 == 0   ? throughput_objective(mc)
                          : variant % 3 == 1 ? cost_objective(mc)
                                             : hitrate_objective(ka);
  return ClusterInstance(PreferenceMatrix(std::move(a)), users, {}, s,
                         LinkProbabilityMatrix(std::move(l)), utility);
}

CachingPolicy random_fractional_policy(const ClusterInstance& inst, Rng& rng) {
  Matrix b(inst.users(), inst.files());
  const double cap = static_cast<double>(inst.cache_size());
  for (std::size_t u = 0; u < inst.users(); ++u) {
    double sum = 0.0;
    for (std::size_t f = 0; f < inst.files(); ++f) sum += (b(u, f) = uniform01(rng));
    const double scale = sum > cap ? cap / sum : 1.0;
    for (std::size_t f = 0; f < inst.files(); ++f) b(u, f) *= scale;
  }
  return CachingPolicy(std::move(b), inst.cache_size());
}

}  // namespace

ValidationResult run_validation(const ExperimentConfig& cfg, ProgressLog log) {
  cfg.validate();
  const MetricConstants mc = default_metric_constants(cfg.scenario.rp, cfg.self_factor);
  const std::vector<CheckTally> blank = {
      {"probability_identity", 0.0},
      {"gradient_vs_finite_difference", 1e-5},
      {"gradient_nonnegative", 1e-12},
      {"utility_trace_monotone", 1e-12},
      {"best_response_fixed_point", 0.0},
      {"integral_full_cache", 0.0},
      {"closed_form_vs_simulation_se", 4.0},
      {"priority_not_below_random_se", 4.0},
      {"scheduler_hit_rate_difference", 0.0},
  };
  enum { kIdentity, kGradient, kNonneg, kMonotone, kFixed, kIntegral, kClosed, kSched, kHit };

  const std::size_t n = cfg.validate_instances;
  std::vector<std::vector<CheckTally>> parts(n, blank);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    std::vector<CheckTally>& t = parts[i];
    Rng rng = make_rng(cfg.seed, {kValidateStream, i});
    const ClusterInstance inst = random_small_instance(rng, mc, i);
    const CachingPolicy policy = random_fractional_policy(inst, rng);

    std::vector<std::uint8_t> up(inst.users());
    for (std::size_t k : inst.active_users()) {
      for (int rep = 0; rep < 8; ++rep) {
        for (std::size_t l = 0; l < up.size(); ++l) up[l] = l == k || uniform01(rng) < 0.5;
        const AccessProbabilities p = access_probabilities(inst, policy, k, up);
        double v = std::abs((p.bs + p.self + p.d2d) - 1.0);
        for (double x : {p.bs, p.self, p.d2d})
          if (x < 0.0 || x > 1.0) v = std::max(v, 1.0);
        t[kIdentity].record(v);
      }
    }

    // Central differences with the step kept inside [0, 1].
    const Matrix g = utility_gradient(inst, policy);
    const double u0 = expected_utility(inst, policy);
    const double floor_scale = 1e-6 * std::max(1.0, std::abs(u0));
    double g_max = 0.0;
    for (double x : g.data()) g_max = std::max(g_max, std::abs(x));
    for (std::size_t k = 0; k < inst.users(); ++k) {
      for (std::size_t m = 0; m < inst.files(); ++m) {
        const double b = policy(k, m);
        const double h = 0.5 * std::min({b, 1.0 - b, 2e-3});
        if (!(h > 0.0)) continue;
        std::vector<double> row(policy.row(k).begin(), policy.row(k).end());
        CachingPolicy shifted = policy;
        row[m] = b + h;
        shifted.set_row(k, row);
        const double up_u = expected_utility(inst, shifted);
        row[m] = b - h;
        shifted.set_row(k, row);
        const double down_u = expected_utility(inst, shifted);
        const double fd = (up_u - down_u) / (2.0 * h);
        t[kGradient].record(std::abs(fd - g(k, m)) / std::max(std::abs(g(k, m)), floor_scale));
        t[kNonneg].record(std::max(0.0, -g(k, m)) / std::max(1.0, g_max));
      }
    }

    OptimizeOptions options;
    options.max_rounds = cfg.design_settings.max_rounds;
    const OptimizerReport report =
        optimize(inst, initial_policy(inst, cfg.design_settings.init), options);
    double worst_drop = 0.0;
    for (std::size_t j = 1; j < report.utility_trace.size(); ++j) {
      const double prev = report.utility_trace[j - 1], next = report.utility_trace[j];
      worst_drop = std::max(worst_drop, (prev - next) / std::max(1.0, std::abs(prev)));
    }
    t[kMonotone].record(worst_drop);
    t[kFixed].record(report.converged && is_best_response_fixed_point(inst, report.policy) ? 0.0
                                                                                            : 1.0);
    double integrality = 0.0;
    for (std::size_t k = 0; k < inst.users(); ++k) {
      double sum = 0.0;
      for (double x : report.policy.row(k)) {
        if (x != 0.0 && x != 1.0) integrality = 1.0;
        sum += x;
      }
      integrality = std::max(integrality, std::abs(sum - static_cast<double>(inst.cache_size())));
    }
    t[kIntegral].record(integrality);

    InstanceSimulationOptions so;
    so.realizations = cfg.validate_realizations;
    so.seed = derive_seed(cfg.seed, {kValidateStream, i, 1});
    const PairedEstimate sim = simulate_instance(inst, policy, mc, so);
    const NetworkMetrics closed = evaluate_metrics(inst, policy, mc);
    auto z = [](double exact, const Estimate& e) {
      if (e.se > 0.0) return std::abs(e.mean - exact) / e.se;
      return std::abs(e.mean - exact) <= 1e-9 * std::max(1.0, std::abs(exact))
                 ? 0.0
                 : std::numeric_limits<double>::infinity();
    };
    t[kClosed].record(std::max({z(closed.throughput, sim.random_push.throughput),
                                z(closed.cost, sim.random_push.energy),
                                z(closed.hit_rate, sim.random_push.hit_rate)}));
    const double gain_z = sim.throughput_gain.se > 0.0
                              ? std::max(0.0, -sim.throughput_gain.mean / sim.throughput_gain.se)
                              : (sim.throughput_gain.mean < 0.0 ? 1e300 : 0.0);
    t[kSched].record(gain_z);
    t[kHit].record(std::abs(sim.priority_push.hit_rate.mean - sim.random_push.hit_rate.mean));
  });

  ValidationResult result;
  result.table = ResultTable({"check", "cases", "failed", "worst", "tolerance"});
  std::vector<CheckTally> total = blank;
  for (const auto& part : parts) {
    for (std::size_t c = 0; c < total.size(); ++c) {
      total[c].cases += part[c].cases;
      total[c].failed += part[c].failed;
      total[c].worst = std::max(total[c].worst, part[c].worst);
    }
  }
  for (const auto& c : total) {
    result.table.add_row({c.name, num(c.cases), num(c.failed), num(c.worst), num(c.tolerance)});
    if (c.failed > 0) result.passed = false;
    if (log)
      *log << "validate: " << c.name << (c.failed ? " FAIL " : " ok ") << c.failed << "/"
           << c.cases << " worst=" << num(c.worst) << '\n';
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

struct SingleCluster {
  ScenarioParams sp;
  MetricConstants mc;
  PreferenceMatrix pool;
  GlobalPopularity pop;
  ClusterRealization cluster;
};

ScenarioParams command_scenario(const ExperimentConfig& cfg, bool default_poisson) {
  ScenarioParams sp = cfg.scenario;
  sp.jobs = cfg.jobs;
  if (poisson_counts(cfg, default_poisson)) sp.fixed_counts.reset();
  else sp.fixed_counts = std::pair{cfg.active_users, cfg.inactive_users};
  return sp;
}

SingleCluster single_cluster(const ExperimentConfig& cfg) {
  SingleCluster s;
  s.sp = command_scenario(cfg, false);
  s.mc = default_metric_constants(s.sp.rp, cfg.self_factor);
  s.pool = make_pool(cfg);
  s.pop = global_popularity(s.pool);
  s.cluster = ClusterSampler(s.sp, s.pool).realize(derive_seed(cfg.seed, {kCommandStream, 0}));
  if (s.cluster.active_count == 0) throw DomainError("the realized cluster has no active users");
  return s;
}

std::vector<std::string> metric_columns() {
  return {"design", "active_users", "inactive_users", "files", "cache_size", "t_net", "c_net",
          "h_net", "ee_net", "rounds", "converged", "stationarity_residual", "t_star"};
}

std::vector<std::string> metric_cells(const ExperimentConfig& cfg, const std::string& design,
                                      const ClusterRealization& c, const DesignOutcome& o) {
  return {design,
          num(c.active_count),
          num(c.inactive_count),
          num(c.preferences.files()),
          num(cfg.cache_size),
          num(o.metrics.throughput),
          num(o.metrics.cost),
          num(o.metrics.hit_rate),
          num(o.metrics.ee),
          num(o.report.rounds),
          o.report.converged ? "1" : "0",
          num(o.report.stationarity_residual),
          num(o.t_star)};
}

std::vector<std::string> command_optimize(const ExperimentConfig& cfg, const fs::path& out) {
  const SingleCluster s = single_cluster(cfg);
  const ClusterInstance inst = make_instance(s.cluster, cfg.cache_size, throughput_objective(s.mc));
  const DesignOutcome o = run_design(cfg.optimize_design, inst, s.mc, s.pop, cfg.design_settings);
  write_file(out / "preferences.csv",
             [&](std::ostream& os) { write_preferences_csv(os, s.cluster.preferences); });
  write_file(out / "links.csv", [&](std::ostream& os) { write_links_csv(os, s.cluster.links); });
  write_file(out / "policy.csv", [&](std::ostream& os) { write_policy_csv(os, o.policy); });
  write_file(out / "report.json", [&](std::ostream& os) { o.report.write_json(os); });
  ResultTable metrics(metric_columns());
  metrics.add_row(metric_cells(cfg, cfg.optimize_design.name(), s.cluster, o));
  write_file(out / "metrics.csv", [&](std::ostream& os) { metrics.write_csv(os); });
  return {"preferences.csv", "links.csv", "policy.csv", "report.json", "metrics.csv"};
}

std::vector<std::string> command_simulate(const ExperimentConfig& cfg, const fs::path& out) {
  std::vector<std::string> cols = {"scheduler", "mode", "realizations", "empty_realizations"};
  for (auto& c : estimate_columns("")) cols.push_back(std::move(c));
  for (const char* c : {"t_net", "c_net", "h_net", "ee_net", "throughput_gain",
                        "throughput_gain_se"})
    cols.emplace_back(c);
  ResultTable table(cols);
  std::vector<std::string> outputs = {"estimates.csv"};
  std::vector<DrawRecord> records;
  const DesignSpec& design = cfg.simulate_design;

  if (cfg.simulate_mode == "cluster") {
    const SingleCluster s = single_cluster(cfg);
    const ClusterInstance inst =
        make_instance(s.cluster, cfg.cache_size, throughput_objective(s.mc));
    CachingPolicy policy;
    NetworkMetrics closed;
    ClusterRealization cluster = s.cluster;
    if (!cfg.simulate_policy_csv.empty()) {
      std::ifstream in(cfg.simulate_policy_csv);
      if (!in) throw IoError("cannot open policy file '" + cfg.simulate_policy_csv + "'");
      policy = read_policy_csv(in, cfg.cache_size);
      if (policy.users() != inst.users() || policy.files() != inst.files())
        throw ParameterError("policy file shape does not match the realized cluster");
      closed = evaluate_metrics(inst, policy, s.mc);
    } else {
      const DesignOutcome o = run_design(design, inst, s.mc, s.pop, cfg.design_settings);
      policy = o.policy;
      closed = o.metrics;
      if (design.base == DesignBase::homogeneous)
        cluster = with_homogeneous_preferences(cluster, s.pop);
    }
    const ClusterDrawResult r =
        simulate_cluster(cluster, policy, s.mc, s.sp.rp, cfg.simulate_realizations,
                         derive_seed(cfg.seed, {kCommandStream, 1}),
                         cfg.simulate_records ? &records : nullptr, cfg.scenario.scheduler);
    const Estimate gain = r.gain.estimate();
    for (Scheduler sch : {Scheduler::random_push, Scheduler::priority_push}) {
      std::vector<std::string> cells = {scheduler_name(sch), "cluster"};
      const SimulationEstimate e =
          (sch == Scheduler::random_push ? r.random_push : r.priority_push).estimate(s.sp.side_m);
      cells.push_back(num(e.realizations));
      cells.push_back(num(e.empty_realizations));
      append_estimate(cells, e);
      // The closed form describes random push only.
      const bool analytic = sch == Scheduler::random_push;
      for (double v : {closed.throughput, closed.cost, closed.hit_rate, closed.ee})
        cells.push_back(analytic ? num(v) : "");
      cells.push_back(num(gain.mean));
      cells.push_back(num(gain.se));
      table.add_row(std::move(cells));
    }
  } else {
    ScenarioParams sp = command_scenario(cfg, true);
    sp.realizations = cfg.simulate_realizations;
    sp.draws_per_cluster = cfg.draws_per_instance;
    sp.seed = derive_seed(cfg.seed, {kCommandStream, 2});
    const MetricConstants mc = default_metric_constants(sp.rp, cfg.self_factor);
    const PreferenceMatrix pool = make_pool(cfg);
    const GlobalPopularity pop = global_popularity(pool);
    PolicySource source = [&](const ClusterRealization& c) {
      const ClusterInstance inst = make_instance(c, cfg.cache_size, throughput_objective(mc));
      return run_design(design, inst, mc, pop, cfg.design_settings).policy;
    };
    const PairedEstimate pe = simulate_paired(source, sp, pool, mc);
    if (cfg.simulate_records) simulate(source, sp, pool, mc, &records);
    for (Scheduler sch : {Scheduler::random_push, Scheduler::priority_push}) {
      std::vector<std::string> cells = {scheduler_name(sch), "scenario"};
      const SimulationEstimate& e =
          sch == Scheduler::random_push ? pe.random_push : pe.priority_push;
      cells.push_back(num(e.realizations));
      cells.push_back(num(e.empty_realizations));
      append_estimate(cells, e);
      cells.insert(cells.end(), 4, "");
      cells.push_back(num(pe.throughput_gain.mean));
      cells.push_back(num(pe.throughput_gain.se));
      table.add_row(std::move(cells));
    }
  }
  write_file(out / "estimates.csv", [&](std::ostream& os) { table.write_csv(os); });
  if (cfg.simulate_records) {
    write_file(out / "draws.csv", [&](std::ostream& os) { write_draw_records_csv(os, records); });
    outputs.emplace_back("draws.csv");
  }
  return outputs;
}

void write_metadata(const ExperimentConfig& cfg, std::string_view command, const fs::path& out,
                    const std::vector<std::string>& outputs) {
  nlohmann::ordered_json meta;
  meta["command"] = std::string(command);
  meta["seed"] = cfg.seed;
  meta["outputs"] = outputs;
  meta["config"] = nlohmann::json::parse(config_to_json(cfg));
  write_text_file(out / "metadata.json", meta.dump(2) + "\n");
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "optimize", "simulate", "sweep-users", "sweep-size", "compare-schedulers", "validate"};
  return names;
}

bool run_command(const ExperimentConfig& cfg, std::string_view command, const std::string& out_dir,
                 ProgressLog log) {
  cfg.validate();
  const fs::path out(out_dir);
  ensure_dir(out);
  std::vector<std::string> outputs;
  bool passed = true;
  auto write_table = [&](const ResultTable& t, const std::string& name) {
    write_file(out / name, [&](std::ostream& os) { t.write_csv(os); });
    outputs.push_back(name);
  };
  if (command == "optimize") {
    outputs = command_optimize(cfg, out);
  } else if (command == "simulate") {
    outputs = command_simulate(cfg, out);
  } else if (command == "sweep-users") {
    write_table(run_user_sweep(cfg, log, cfg.dump_instances ? out_dir : std::string{}),
                "sweep_users.csv");
  } else if (command == "sweep-size") {
    write_table(run_cluster_size_sweep(cfg, log, cfg.dump_instances ? out_dir : std::string{}),
                "sweep_size.csv");
  } else if (command == "compare-schedulers") {
    write_table(run_scheduler_compare(cfg, log), "compare_schedulers.csv");
  } else if (command == "validate") {
    ValidationResult v = run_validation(cfg, log);
    write_table(v.table, "validate.csv");
    passed = v.passed;
  } else {
    throw ParameterError("unknown command '" + std::string(command) + "'");
  }
  write_metadata(cfg, command, out, outputs);
  return passed;
}

}  // namespace d2dcache
