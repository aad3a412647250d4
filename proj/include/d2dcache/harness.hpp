#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "d2dcache/optimizer.hpp"
#include "d2dcache/preference.hpp"
#include "d2dcache/simulator.hpp"

namespace d2dcache {

/// How a design obtains its policy.
enum class DesignBase {
  proposed,     // optimize under the true individual preferences
  global,       // optimize under global popularity, evaluate under true preferences
  homogeneous,  // optimize and evaluate under global popularity
  selfish,      // every active user caches its own top-S files
};

/// Text form: `selfish`, or `[proposed:|global:|homogeneous:]objective`
/// where objective is throughput | cost | hitrate | tradeoff(z) | ee.
struct DesignSpec {
  DesignBase base = DesignBase::proposed;
  ObjectiveSpec objective;

  std::string name() const;
  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

DesignSpec parse_design(std::string_view text);

struct DesignSettings {
  InitKind init = InitKind::zeros;
  std::size_t max_rounds = 0;
  double ee_tolerance = 1e-6;
};

struct DesignOutcome {
  CachingPolicy policy;
  /// Closed-form metrics under the design's evaluation preferences.
  NetworkMetrics metrics;
  /// Empty trace for selfish designs.
  OptimizerReport report;
  /// Dinkelbach fixed point, ee designs only.
  double t_star = 0.0;
};

/// Runs one design on one instance. `pop` is only read by global and
/// homogeneous designs.
DesignOutcome run_design(const DesignSpec& design, const ClusterInstance& inst,
                         const MetricConstants& mc, const GlobalPopularity& pop,
                         const DesignSettings& settings = {});

enum class SweepVariable { active_users, cluster_size };

/// Every experiment knob. Defaults reproduce the reference setup, so a
/// minimal config names only the sweep and the designs.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  SweepVariable sweep_variable = SweepVariable::active_users;
  std::vector<double> sweep_values{20.0};
  std::vector<DesignSpec> designs{DesignSpec{}};

  /// side_m, densities, reuse factor, link model and radio constants.
  ScenarioParams scenario;
  std::size_t active_users = 20;
  std::size_t inactive_users = 0;
  /// "" picks fixed counts for user sweeps and Poisson counts for size sweeps.
  std::string counts;

  double self_factor = 2.0;
  std::size_t pool_users = 1000;
  std::size_t files = 1000;
  GeneratorParams generator;
  std::size_t cache_size = 10;
  DesignSettings design_settings;

  std::size_t instances = 20;
  bool simulate = false;
  std::size_t draws_per_instance = 1000;
  bool dump_instances = false;

  DesignSpec optimize_design;
  std::string simulate_policy_csv;
  DesignSpec simulate_design;
  std::string simulate_mode = "cluster";
  std::size_t simulate_realizations = 10000;
  bool simulate_records = false;

  std::size_t validate_instances = 40;
  std::size_t validate_realizations = 20000;

  /// Throws ConfigError listing every problem.
  void validate() const;
};

/// Reads a JSON object whose keys are dotted paths (`radio.min_snr_db`) or
/// nested objects. Unknown keys and bad values are all reported in a single
/// ConfigError.
ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig parse_config(std::string_view json_text);
/// Fully resolved config as JSON, keys sorted.
std::string config_to_json(const ExperimentConfig& cfg);
/// Every accepted key, sorted.
std::vector<std::string> config_keys();

/// String cells in a fixed column order. Numbers are stored in shortest
/// round-trip form; an empty cell means "not applicable".
class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  std::size_t rows() const noexcept { return cells_.size(); }
  std::size_t column_index(std::string_view name) const;

  void add_row(std::vector<std::string> cells);
  const std::string& text(std::size_t row, std::string_view column) const;
  /// NaN for an empty cell.
  double number(std::size_t row, std::string_view column) const;

  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> cells_;
};

/// Optional progress sink (standard error in the CLI); may be null.
using ProgressLog = std::ostream*;

ResultTable run_user_sweep(const ExperimentConfig& cfg, ProgressLog log = nullptr,
                           const std::string& dump_dir = {});
ResultTable run_cluster_size_sweep(const ExperimentConfig& cfg, ProgressLog log = nullptr,
                                   const std::string& dump_dir = {});
ResultTable run_scheduler_compare(const ExperimentConfig& cfg, ProgressLog log = nullptr);

struct ValidationResult {
  ResultTable table;
  bool passed = true;
};

/// Invariant suite on small random instances.
ValidationResult run_validation(const ExperimentConfig& cfg, ProgressLog log = nullptr);

/// Runs one CLI subcommand and writes its outputs into `out_dir` (created if
/// missing). Returns false only when `validate` finds a violation.
bool run_command(const ExperimentConfig& cfg, std::string_view command,
                 const std::string& out_dir, ProgressLog log = nullptr);

/// Subcommand names accepted by run_command.
const std::vector<std::string>& command_names();

}  // namespace d2dcache
