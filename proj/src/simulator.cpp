#include "d2dcache/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "d2dcache/csv.hpp"
#include "d2dcache/error.hpp"
#include "d2dcache/parallel.hpp"
#include "d2dcache/random.hpp"

namespace d2dcache {

const char* scheduler_name(Scheduler s) noexcept {
  return s == Scheduler::random_push ? "random_push" : "priority_push";
}

Scheduler parse_scheduler(std::string_view text) {
  if (text == "random_push" || text == "random") return Scheduler::random_push;
  if (text == "priority_push" || text == "priority") return Scheduler::priority_push;
  throw ParameterError("unknown scheduler '" + std::string(text) + "'");
}

const char* link_model_name(LinkModel m) noexcept {
  switch (m) {
    case LinkModel::case1: return "case1";
    case LinkModel::case2: return "case2";
    case LinkModel::case3: return "case3";
  }
  return "?";
}

LinkModel parse_link_model(std::string_view text) {
  if (text == "case1") return LinkModel::case1;
  if (text == "case2") return LinkModel::case2;
  if (text == "case3") return LinkModel::case3;
  throw ParameterError("unknown link model '" + std::string(text) + "'");
}

const char* serve_mode_name(ServeMode m) noexcept {
  switch (m) {
    case ServeMode::none: return "none";
    case ServeMode::self: return "self";
    case ServeMode::d2d: return "d2d";
    case ServeMode::bs: return "bs";
  }
  return "?";
}

void ScenarioParams::validate() const {
  if (!(side_m > 0.0) || !std::isfinite(side_m)) throw ParameterError("side_m must be positive");
  if (!(lambda_active >= 0.0) || !std::isfinite(lambda_active))
    throw ParameterError("lambda_active must be >= 0");
  if (!(lambda_inactive >= 0.0) || !std::isfinite(lambda_inactive))
    throw ParameterError("lambda_inactive must be >= 0");
  if (!(reuse_factor >= 1.0)) throw ParameterError("reuse_factor must be >= 1");
  if (realizations < 1) throw ParameterError("realizations must be >= 1");
  if (draws_per_cluster < 1) throw ParameterError("draws_per_cluster must be >= 1");
  rp.validate();
}

// ---------------------------------------------------------------------------
// Cluster realization

ClusterSampler::ClusterSampler(const ScenarioParams& sp, const PreferenceMatrix& pool)
    : sp_(sp), pool_(&pool) {
  sp_.validate();
  if (pool.users() == 0) throw ParameterError("preference pool is empty");
  if (sp_.link_model == LinkModel::case3) case3_link_ = link_prob_case3(sp_.side_m, sp_.rp);
}

ClusterRealization ClusterSampler::realize(std::uint64_t seed) const {
  Rng rng(seed);
  ClusterRealization c;
  c.side_m = sp_.side_m;
  c.link_model = sp_.link_model;
  if (sp_.fixed_counts) {
    c.active_count = sp_.fixed_counts->first;
    c.inactive_count = sp_.fixed_counts->second;
  } else {
    const double area = sp_.side_m * sp_.side_m;
    auto poisson = [&](double mean) -> std::size_t {
      if (mean <= 0.0) return 0;
      return static_cast<std::size_t>(std::poisson_distribution<long long>(mean)(rng));
    };
    c.active_count = poisson(sp_.lambda_active * area);
    c.inactive_count = poisson(sp_.lambda_inactive * area);
  }
  const std::size_t k = c.users();
  c.layout = draw_layout(k, sp_.side_m, rng);
  c.shadow_gains = draw_shadow_gains(k, sp_.rp, rng);
  c.pool_rows.resize(k);
  for (auto& r : c.pool_rows) r = uniform_index(rng, pool_->users());
  c.preferences = pool_->select_rows(c.pool_rows);
  switch (sp_.link_model) {
    case LinkModel::case1: c.links = link_prob_case1(k); break;
    case LinkModel::case2:
      c.links = k == 0 ? LinkProbabilityMatrix{} : link_prob_case2(c.layout, c.shadow_gains, sp_.rp);
      break;
    case LinkModel::case3: c.links = LinkProbabilityMatrix::uniform(k, case3_link_); break;
  }
  return c;
}

ClusterRealization realize_cluster(const ScenarioParams& sp, const PreferenceMatrix& pool,
                                   std::uint64_t seed) {
  return ClusterSampler(sp, pool).realize(seed);
}

ClusterInstance make_instance(const ClusterRealization& cluster, std::size_t cache_size,
                              const UtilityTriple& utility) {
  if (cluster.active_count == 0) throw DomainError("cluster has no active users");
  std::vector<std::size_t> active(cluster.active_count);
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  return ClusterInstance(cluster.preferences, std::move(active), {}, cache_size, cluster.links,
                         utility);
}

// ---------------------------------------------------------------------------
// Accumulators

void OutcomeAccumulator::add(double throughput, double energy, double hit_rate, bool empty) {
  ++n_;
  if (empty) ++empty_;
  t_ += throughput;
  t2_ += throughput * throughput;
  e_ += energy;
  e2_ += energy * energy;
  te_ += throughput * energy;
  h_ += hit_rate;
  h2_ += hit_rate * hit_rate;
}

void OutcomeAccumulator::merge(const OutcomeAccumulator& o) {
  n_ += o.n_;
  empty_ += o.empty_;
  t_ += o.t_;
  t2_ += o.t2_;
  e_ += o.e_;
  e2_ += o.e2_;
  te_ += o.te_;
  h_ += o.h_;
  h2_ += o.h2_;
}

namespace {

// Unbiased sample covariance from raw sums.
double sample_cov(std::size_t n, double sx, double sy, double sxy) {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  return (sxy - sx * sy / nn) / (nn - 1.0);
}

Estimate mean_estimate(std::size_t n, double s, double s2) {
  if (n == 0) return {};
  const double nn = static_cast<double>(n);
  return {s / nn, std::sqrt(std::max(0.0, sample_cov(n, s, s, s2)) / nn)};
}

}  // namespace

SimulationEstimate OutcomeAccumulator::estimate(double side_m) const {
  SimulationEstimate est;
  est.realizations = n_;
  est.empty_realizations = empty_;
  if (n_ == 0) return est;
  est.throughput = mean_estimate(n_, t_, t2_);
  est.energy = mean_estimate(n_, e_, e2_);
  est.hit_rate = mean_estimate(n_, h_, h2_);
  const double area = side_m * side_m;
  est.area_throughput = {est.throughput.mean / area, est.throughput.se / area};

  const double mt = est.throughput.mean, me = est.energy.mean;
  if (me > 0.0) {
    const double r = mt / me;
    // Delta method for a ratio of means.
    const double var = sample_cov(n_, t_, t_, t2_) - 2.0 * r * sample_cov(n_, t_, e_, te_) +
                       r * r * sample_cov(n_, e_, e_, e2_);
    est.ee = {r, std::sqrt(std::max(0.0, var) / static_cast<double>(n_)) / me};
  } else {
    est.ee = {mt > 0.0 ? std::numeric_limits<double>::infinity() : 0.0, 0.0};
  }
  return est;
}

void PairedAccumulator::add(double diff) {
  ++n_;
  d_ += diff;
  d2_ += diff * diff;
}

void PairedAccumulator::merge(const PairedAccumulator& o) {
  n_ += o.n_;
  d_ += o.d_;
  d2_ += o.d2_;
}

Estimate PairedAccumulator::estimate() const { return mean_estimate(n_, d_, d2_); }

// ---------------------------------------------------------------------------
// Draw engine

namespace {

enum class LinkSource { bernoulli, case1, case2, case3 };

struct DrawOutcome {
  double throughput = 0.0;
  double energy = 0.0;
  ServeMode mode = ServeMode::none;
};

/// Everything one request/channel draw needs. Not thread-safe: the per-draw
/// memo tables are reused across draws.
class DrawEngine {
 public:
  DrawEngine(std::vector<std::size_t> active, std::vector<double> weights,
             const PreferenceMatrix& prefs, const CachingPolicy& policy,
             const MetricConstants& mc, LinkSource source, const LinkProbabilityMatrix* links,
             const UserLayout* layout, const Matrix* shadow, const RadioParams* rp)
      : active_(std::move(active)),
        weights_(std::move(weights)),
        policy_(&policy),
        mc_(mc),
        source_(source),
        links_(links),
        layout_(layout),
        shadow_(shadow),
        rp_(rp),
        users_(policy.users()) {
    const std::size_t m = prefs.files();
    cdf_.reserve(active_.size());
    for (std::size_t k : active_) {
      std::vector<double> c(m);
      double acc = 0.0;
      for (std::size_t f = 0; f < m; ++f) c[f] = (acc += prefs(k, f));
      cdf_.push_back(std::move(c));
    }
    holders_.resize(policy.files());
    for (std::size_t l = 0; l < users_; ++l)
      for (std::size_t f = 0; f < policy.files(); ++f)
        if (policy(l, f) > 0.0) holders_[f].push_back(l);
    if (source_ == LinkSource::case3) {
      shadow_memo_.assign(users_ * users_, 0.0);
      shadow_stamp_.assign(users_ * users_, 0);
    }
    if (rp_ && rp_->shadow_sigma_db > 0.0)
      normal_ = std::normal_distribution<double>(rp_->shadow_mu_db, rp_->shadow_sigma_db);
  }

  /// Runs draw `stream` and returns the random-push and priority-push
  /// outcomes plus the (shared) hit-rate.
  void run(std::uint64_t stream_seed, DrawOutcome& random, DrawOutcome& priority, double& hit) {
    Rng rng(stream_seed);
    ++stamp_;
    holdings_.clear();
    const std::size_t ka = active_.size();
    req_.resize(ka);
    self_.assign(ka, 0);
    d2d_.assign(ka, 0);
    for (std::size_t i = 0; i < ka; ++i) {
      const auto& c = cdf_[i];
      const double u = uniform01(rng) * c.back();
      auto it = std::upper_bound(c.begin(), c.end(), u);
      req_[i] = std::min<std::size_t>(static_cast<std::size_t>(it - c.begin()), c.size() - 1);
    }
    double self_t = 0.0, self_c = 0.0, hit_w = 0.0;
    for (std::size_t i = 0; i < ka; ++i) {
      const std::size_t k = active_[i], f = req_[i];
      const auto& held = holdings(f, rng);
      self_[i] = std::binary_search(held.begin(), held.end(), k);
      if (!self_[i]) {
        for (std::size_t l : held) {
          if (l != k && link_up(k, l, rng)) {
            d2d_[i] = 1;
            break;
          }
        }
      } else {
        self_t += weights_[i] * mc_.t_s;
        self_c += weights_[i] * mc_.c_s;
      }
      if (self_[i] || d2d_[i]) hit_w += weights_[i];
    }
    const std::size_t selected = uniform_index(rng, ka);
    const double pick = uniform01(rng);
    hit = hit_w / static_cast<double>(ka);

    random = {self_t, self_c, ServeMode::self};
    if (!self_[selected]) {
      const double w = weights_[selected];
      if (d2d_[selected]) {
        random.throughput += w * mc_.t_d;
        random.energy += w * mc_.c_d;
        random.mode = ServeMode::d2d;
      } else {
        random.throughput += w * mc_.t_b;
        random.energy += w * mc_.c_b;
        random.mode = ServeMode::bs;
      }
    }

    priority = {self_t, self_c, ServeMode::self};
    unsat_.clear();
    d2d_ready_.clear();
    for (std::size_t i = 0; i < ka; ++i) {
      if (self_[i]) continue;
      unsat_.push_back(i);
      if (d2d_[i]) d2d_ready_.push_back(i);
    }
    const bool via_d2d = !d2d_ready_.empty();
    const auto& pool = via_d2d ? d2d_ready_ : unsat_;
    if (!pool.empty()) {
      const std::size_t idx =
          std::min(pool.size() - 1, static_cast<std::size_t>(pick * static_cast<double>(pool.size())));
      const double w = weights_[pool[idx]];
      priority.throughput += w * (via_d2d ? mc_.t_d : mc_.t_b);
      priority.energy += w * (via_d2d ? mc_.c_d : mc_.c_b);
      priority.mode = via_d2d ? ServeMode::d2d : ServeMode::bs;
    }
  }

 private:
  // Users holding file f in this draw, ascending. Fractional entries are
  // sampled once per draw and file.
  const std::vector<std::size_t>& holdings(std::size_t f, Rng& rng) {
    auto it = holdings_.find(f);
    if (it != holdings_.end()) return it->second;
    std::vector<std::size_t> held;
    for (std::size_t l : holders_[f]) {
      const double b = (*policy_)(l, f);
      if (b >= 1.0 || uniform01(rng) < b) held.push_back(l);
    }
    return holdings_.emplace(f, std::move(held)).first->second;
  }

  double fading(Rng& rng) { return -std::log1p(-uniform01(rng)); }

  bool link_up(std::size_t k, std::size_t l, Rng& rng) {
    switch (source_) {
      case LinkSource::bernoulli: {
        const double p = (*links_)(k, l);
        return p >= 1.0 || uniform01(rng) < p;
      }
      case LinkSource::case1: return true;
      case LinkSource::case2:
        return link_feasible(layout_->distance(k, l), (*shadow_)(k, l), fading(rng), *rp_);
      case LinkSource::case3: {
        const std::size_t key = std::min(k, l) * users_ + std::max(k, l);
        if (shadow_stamp_[key] != stamp_) {
          shadow_stamp_[key] = stamp_;
          normal_.reset();
          const double db = rp_->shadow_sigma_db > 0.0 ? normal_(rng) : rp_->shadow_mu_db;
          shadow_memo_[key] = db_to_linear(db);
        }
        return link_feasible(layout_->distance(k, l), shadow_memo_[key], fading(rng), *rp_);
      }
    }
    return false;
  }

  std::vector<std::size_t> active_;
  std::vector<double> weights_;
  const CachingPolicy* policy_;
  MetricConstants mc_;
  LinkSource source_;
  const LinkProbabilityMatrix* links_;
  const UserLayout* layout_;
  const Matrix* shadow_;
  const RadioParams* rp_;
  std::size_t users_;

  std::vector<std::vector<double>> cdf_;
  std::vector<std::vector<std::size_t>> holders_;
  std::unordered_map<std::size_t, std::vector<std::size_t>> holdings_;
  std::vector<double> shadow_memo_;
  std::vector<std::uint64_t> shadow_stamp_;
  std::uint64_t stamp_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};

  std::vector<std::size_t> req_;
  std::vector<std::uint8_t> self_, d2d_;
  std::vector<std::size_t> unsat_, d2d_ready_;
};

LinkSource physical_source(LinkModel m) {
  switch (m) {
    case LinkModel::case1: return LinkSource::case1;
    case LinkModel::case2: return LinkSource::case2;
    case LinkModel::case3: return LinkSource::case3;
  }
  return LinkSource::case1;
}

void check_policy_shape(const CachingPolicy& policy, std::size_t users, std::size_t files) {
  if (policy.users() != users || policy.files() != files)
    throw ParameterError("policy shape does not match the cluster");
}

}  // namespace

ClusterDrawResult simulate_cluster(const ClusterRealization& cluster, const CachingPolicy& policy,
                                   const MetricConstants& mc, const RadioParams& rp,
                                   std::size_t draws, std::uint64_t seed,
                                   std::vector<DrawRecord>* records, Scheduler recorded,
                                   std::size_t realization_id) {
  ClusterDrawResult out;
  auto record = [&](std::size_t d, const DrawOutcome& o) {
    if (!records) return;
    records->push_back({realization_id, d, cluster.active_count, cluster.inactive_count, o.mode,
                        o.throughput, o.energy});
  };
  if (cluster.active_count == 0) {
    for (std::size_t d = 0; d < draws; ++d) {
      out.random_push.add(0.0, 0.0, 0.0, true);
      out.priority_push.add(0.0, 0.0, 0.0, true);
      out.gain.add(0.0);
      record(d, {});
    }
    return out;
  }
  check_policy_shape(policy, cluster.users(), cluster.preferences.files());
  std::vector<std::size_t> active(cluster.active_count);
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  DrawEngine engine(std::move(active), std::vector<double>(cluster.active_count, 1.0),
                    cluster.preferences, policy, mc, physical_source(cluster.link_model), nullptr,
                    &cluster.layout, &cluster.shadow_gains, &rp);
  DrawOutcome r, p;
  double hit = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    engine.run(derive_seed(seed, {d}), r, p, hit);
    out.random_push.add(r.throughput, r.energy, hit);
    out.priority_push.add(p.throughput, p.energy, hit);
    out.gain.add(p.throughput - r.throughput);
    record(d, recorded == Scheduler::random_push ? r : p);
  }
  return out;
}

namespace {

struct ScenarioRun {
  ClusterDrawResult totals;
  std::vector<DrawRecord> records;
};

ScenarioRun run_scenario(const PolicySource& source, const ScenarioParams& sp,
                         const PreferenceMatrix& pool, const MetricConstants& mc,
                         bool keep_records) {
  mc.validate();
  ClusterSampler sampler(sp, pool);
  std::vector<ClusterDrawResult> parts(sp.realizations);
  std::vector<std::vector<DrawRecord>> recs(keep_records ? sp.realizations : 0);
  parallel_for(sp.realizations, sp.jobs, [&](std::size_t r) {
    ClusterRealization cluster = sampler.realize(derive_seed(sp.seed, {r, 0}));
    CachingPolicy policy;
    if (cluster.active_count > 0) policy = source(cluster);
    parts[r] = simulate_cluster(cluster, policy, mc, sp.rp, sp.draws_per_cluster,
                                derive_seed(sp.seed, {r, 1}), keep_records ? &recs[r] : nullptr,
                                sp.scheduler, r);
  });
  ScenarioRun run;
  for (std::size_t r = 0; r < parts.size(); ++r) {
    run.totals.random_push.merge(parts[r].random_push);
    run.totals.priority_push.merge(parts[r].priority_push);
    run.totals.gain.merge(parts[r].gain);
    if (keep_records) run.records.insert(run.records.end(), recs[r].begin(), recs[r].end());
  }
  return run;
}

}  // namespace

SimulationEstimate simulate(const PolicySource& source, const ScenarioParams& sp,
                            const PreferenceMatrix& pool, const MetricConstants& mc,
                            std::vector<DrawRecord>* records) {
  ScenarioRun run = run_scenario(source, sp, pool, mc, records != nullptr);
  if (records) *records = std::move(run.records);
  const auto& acc = sp.scheduler == Scheduler::random_push ? run.totals.random_push
                                                           : run.totals.priority_push;
  return acc.estimate(sp.side_m);
}

SimulationEstimate simulate_random_push(const PolicySource& source, ScenarioParams sp,
                                        const PreferenceMatrix& pool, const MetricConstants& mc,
                                        std::vector<DrawRecord>* records) {
  sp.scheduler = Scheduler::random_push;
  return simulate(source, sp, pool, mc, records);
}

SimulationEstimate simulate_priority_push(const PolicySource& source, ScenarioParams sp,
                                          const PreferenceMatrix& pool, const MetricConstants& mc,
                                          std::vector<DrawRecord>* records) {
  sp.scheduler = Scheduler::priority_push;
  return simulate(source, sp, pool, mc, records);
}

PairedEstimate simulate_paired(const PolicySource& source, const ScenarioParams& sp,
                               const PreferenceMatrix& pool, const MetricConstants& mc) {
  ScenarioRun run = run_scenario(source, sp, pool, mc, false);
  return {run.totals.random_push.estimate(sp.side_m), run.totals.priority_push.estimate(sp.side_m),
          run.totals.gain.estimate()};
}

PairedEstimate simulate_instance(const ClusterInstance& inst, const CachingPolicy& policy,
                                 const MetricConstants& mc,
                                 const InstanceSimulationOptions& options) {
  mc.validate();
  if (options.realizations < 1) throw ParameterError("realizations must be >= 1");
  check_policy_shape(policy, inst.users(), inst.files());
  // Fixed chunking keeps the floating-point reduction independent of jobs.
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (options.realizations + kChunk - 1) / kChunk;
  std::vector<ClusterDrawResult> parts(chunks);
  std::vector<double> weights;
  for (std::size_t k : inst.active_users()) weights.push_back(inst.weight(k));
  parallel_for(chunks, options.jobs, [&](std::size_t c) {
    DrawEngine engine(inst.active_users(), weights, inst.preferences(), policy, mc,
                      LinkSource::bernoulli, &inst.links(), nullptr, nullptr, nullptr);
    DrawOutcome r, p;
    double hit = 0.0;
    const std::size_t end = std::min(options.realizations, (c + 1) * kChunk);
    for (std::size_t d = c * kChunk; d < end; ++d) {
      engine.run(derive_seed(options.seed, {d}), r, p, hit);
      parts[c].random_push.add(r.throughput, r.energy, hit);
      parts[c].priority_push.add(p.throughput, p.energy, hit);
      parts[c].gain.add(p.throughput - r.throughput);
    }
  });
  ClusterDrawResult total;
  for (const auto& part : parts) {
    total.random_push.merge(part.random_push);
    total.priority_push.merge(part.priority_push);
    total.gain.merge(part.gain);
  }
  // Instances carry no geometry; area figures are per unit area.
  return {total.random_push.estimate(1.0), total.priority_push.estimate(1.0),
          total.gain.estimate()};
}

void write_draw_records_csv(std::ostream& out, const std::vector<DrawRecord>& records) {
  out << "realization,draw,active_users,inactive_users,serve_mode,throughput,energy\n";
  for (const auto& r : records) {
    out << r.realization << ',' << r.draw << ',' << r.active_count << ',' << r.inactive_count
        << ',' << serve_mode_name(r.mode) << ',' << csv::format_double(r.throughput) << ','
        << csv::format_double(r.energy) << '\n';
  }
}

void write_estimate_csv(std::ostream& out,
                        const std::vector<std::pair<std::string, SimulationEstimate>>& rows) {
  out << "label,realizations,empty_realizations,throughput,throughput_se,area_throughput,"
         "area_throughput_se,energy,energy_se,ee,ee_se,hit_rate,hit_rate_se\n";
  for (const auto& [label, e] : rows) {
    out << label << ',' << e.realizations << ',' << e.empty_realizations;
    for (const Estimate* x : {&e.throughput, &e.area_throughput, &e.energy, &e.ee, &e.hit_rate})
      out << ',' << csv::format_double(x->mean) << ',' << csv::format_double(x->se);
    out << '\n';
  }
}

}  // namespace d2dcache
