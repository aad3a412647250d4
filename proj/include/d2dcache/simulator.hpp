#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "d2dcache/channel.hpp"
#include "d2dcache/objectives.hpp"
#include "d2dcache/optimizer.hpp"
#include "d2dcache/preference.hpp"

namespace d2dcache {

enum class Scheduler { random_push, priority_push };

/// Which closed-form link model the analysis path uses; the simulation always
/// draws instantaneous links from the matching physical model.
enum class LinkModel {
  case1,  // every link succeeds
  case2,  // positions and shadowing fixed per cluster, Rayleigh per draw
  case3,  // positions fixed per cluster, shadowing and Rayleigh per draw
};

const char* scheduler_name(Scheduler s) noexcept;
Scheduler parse_scheduler(std::string_view text);
const char* link_model_name(LinkModel m) noexcept;
LinkModel parse_link_model(std::string_view text);

struct ScenarioParams {
  double side_m = 80.0;
  double lambda_active = 0.01;    // users / m^2
  double lambda_inactive = 0.0;   // users / m^2
  /// (K_A, K_I); overrides the Poisson draws when set.
  std::optional<std::pair<std::size_t, std::size_t>> fixed_counts;
  RadioParams rp;
  double reuse_factor = 16.0;
  Scheduler scheduler = Scheduler::random_push;
  LinkModel link_model = LinkModel::case3;
  std::size_t realizations = 10000;
  /// Request/channel draws per realized cluster.
  std::size_t draws_per_cluster = 1;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const;
};

/// One realized cluster. Users [0, K_A) are active, the rest inactive.
struct ClusterRealization {
  std::size_t active_count = 0;
  std::size_t inactive_count = 0;
  double side_m = 0.0;
  UserLayout layout;
  std::vector<std::size_t> pool_rows;
  PreferenceMatrix preferences;
  Matrix shadow_gains;
  LinkProbabilityMatrix links;
  LinkModel link_model = LinkModel::case3;

  std::size_t users() const noexcept { return active_count + inactive_count; }
};

/// Draws clusters for one scenario; the Case-3 link probability is computed
/// once on construction.
class ClusterSampler {
 public:
  /// Keeps a reference to `pool`, which must outlive the sampler.
  ClusterSampler(const ScenarioParams& sp, const PreferenceMatrix& pool);
  ClusterSampler(const ScenarioParams& sp, PreferenceMatrix&& pool) = delete;

  ClusterRealization realize(std::uint64_t seed) const;
  double case3_link_probability() const noexcept { return case3_link_; }

 private:
  ScenarioParams sp_;
  const PreferenceMatrix* pool_;
  double case3_link_ = 1.0;
};

ClusterRealization realize_cluster(const ScenarioParams& sp, const PreferenceMatrix& pool,
                                   std::uint64_t seed);

/// Analysis view of a realization (needs K_A >= 1).
ClusterInstance make_instance(const ClusterRealization& cluster, std::size_t cache_size,
                              const UtilityTriple& utility);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct SimulationEstimate {
  Estimate throughput;       // bits/s
  Estimate area_throughput;  // bits/s/m^2
  Estimate energy;           // W
  Estimate ee;               // bits/J, ratio of means
  Estimate hit_rate;
  std::size_t realizations = 0;  // samples: clusters x draws per cluster
  std::size_t empty_realizations = 0;
};

enum class ServeMode { none, self, d2d, bs };
const char* serve_mode_name(ServeMode m) noexcept;

struct DrawRecord {
  std::size_t realization = 0;
  std::size_t draw = 0;
  std::size_t active_count = 0;
  std::size_t inactive_count = 0;
  ServeMode mode = ServeMode::none;
  double throughput = 0.0;
  double energy = 0.0;
};

void write_draw_records_csv(std::ostream& out, const std::vector<DrawRecord>& records);

/// Moment sums for one scheduler; samples are added in a fixed order so the
/// resulting estimate is reproducible.
class OutcomeAccumulator {
 public:
  void add(double throughput, double energy, double hit_rate, bool empty = false);
  void merge(const OutcomeAccumulator& other);
  SimulationEstimate estimate(double side_m) const;
  std::size_t count() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
  std::size_t empty_ = 0;
  double t_ = 0, t2_ = 0, e_ = 0, e2_ = 0, te_ = 0, h_ = 0, h2_ = 0;
};

/// Paired difference priority - random of per-draw throughput.
class PairedAccumulator {
 public:
  void add(double diff);
  void merge(const PairedAccumulator& other);
  Estimate estimate() const;

 private:
  std::size_t n_ = 0;
  double d_ = 0, d2_ = 0;
};

struct PairedEstimate {
  SimulationEstimate random_push;
  SimulationEstimate priority_push;
  Estimate throughput_gain;  // priority - random, paired per draw
};

/// Both schedulers over the draws of one realized cluster and fixed policy.
struct ClusterDrawResult {
  OutcomeAccumulator random_push;
  OutcomeAccumulator priority_push;
  PairedAccumulator gain;
};

/// Simulates `draws` request/channel draws on one realized cluster. Draw d
/// uses the stream (seed, d).
ClusterDrawResult simulate_cluster(const ClusterRealization& cluster, const CachingPolicy& policy,
                                   const MetricConstants& mc, const RadioParams& rp,
                                   std::size_t draws, std::uint64_t seed,
                                   std::vector<DrawRecord>* records = nullptr,
                                   Scheduler recorded = Scheduler::random_push,
                                   std::size_t realization_id = 0);

using PolicySource = std::function<CachingPolicy(const ClusterRealization&)>;

/// Scenario simulation: every realization draws a fresh cluster, asks the
/// policy source for its policy, then simulates draws_per_cluster draws.
SimulationEstimate simulate(const PolicySource& source, const ScenarioParams& sp,
                            const PreferenceMatrix& pool, const MetricConstants& mc,
                            std::vector<DrawRecord>* records = nullptr);
SimulationEstimate simulate_random_push(const PolicySource& source, ScenarioParams sp,
                                        const PreferenceMatrix& pool, const MetricConstants& mc,
                                        std::vector<DrawRecord>* records = nullptr);
SimulationEstimate simulate_priority_push(const PolicySource& source, ScenarioParams sp,
                                          const PreferenceMatrix& pool, const MetricConstants& mc,
                                          std::vector<DrawRecord>* records = nullptr);
PairedEstimate simulate_paired(const PolicySource& source, const ScenarioParams& sp,
                               const PreferenceMatrix& pool, const MetricConstants& mc);

/// Fixed-instance simulation where the link between requester k and holder l
/// is up independently with probability L_{k,l}: the executable form of the
/// closed-form expectation.
struct InstanceSimulationOptions {
  std::size_t realizations = 100000;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

PairedEstimate simulate_instance(const ClusterInstance& inst, const CachingPolicy& policy,
                                 const MetricConstants& mc,
                                 const InstanceSimulationOptions& options = {});

void write_estimate_csv(std::ostream& out, const std::vector<std::pair<std::string, SimulationEstimate>>& rows);

}  // namespace d2dcache
