#include "d2dcache/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <utility>

#include "json.hpp"

#include "d2dcache/csv.hpp"
#include "d2dcache/error.hpp"

namespace d2dcache {

namespace {

// Users holding a nonzero share of one file, ascending by user index.
struct Holder {
  std::size_t user;
  double prob;
};
using HolderLists = std::vector<std::vector<Holder>>;

HolderLists holders_by_file(const CachingPolicy& policy) {
  HolderLists holders(policy.files());
  for (std::size_t l = 0; l < policy.users(); ++l) {
    auto row = policy.row(l);
    for (std::size_t m = 0; m < row.size(); ++m)
      if (row[m] > 0.0) holders[m].push_back({l, row[m]});
  }
  return holders;
}

// Probability that requester k cannot fetch the file from any holder,
// optionally skipping one holder.
double miss_probability(const std::vector<Holder>& holders, const LinkProbabilityMatrix& links,
                        std::size_t requester,
                        std::size_t skipped = std::numeric_limits<std::size_t>::max()) {
  double p = 1.0;
  for (const Holder& h : holders)
    if (h.user != skipped) p *= 1.0 - h.prob * links(requester, h.user);
  return p;
}

void check_dimensions(const ClusterInstance& inst, const CachingPolicy& policy) {
  if (policy.users() != inst.users() || policy.files() != inst.files())
    throw ParameterError("policy is " + std::to_string(policy.users()) + "x" +
                         std::to_string(policy.files()) + " but the instance is " +
                         std::to_string(inst.users()) + "x" + std::to_string(inst.files()));
}

double total_active_weight(const ClusterInstance& inst) {
  double sum = 0.0;
  for (std::size_t k : inst.active_users()) sum += inst.weight(k);
  return sum;
}

// Sum_m Sum_{k active} w_k a_m^k b_m^k / K_A.
double self_access_mass(const ClusterInstance& inst, const CachingPolicy& policy) {
  const double ka = static_cast<double>(inst.active_count());
  double sum = 0.0;
  for (std::size_t k : inst.active_users()) {
    auto a = inst.preferences().row(k);
    auto b = policy.row(k);
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) s += a[m] * b[m];
    sum += inst.weight(k) * s / ka;
  }
  return sum;
}

double bs_mass_from_holders(const ClusterInstance& inst, const HolderLists& holders) {
  const double ka = static_cast<double>(inst.active_count());
  double total = 0.0;
  for (std::size_t k : inst.active_users()) {
    auto a = inst.preferences().row(k);
    const double wk = inst.weight(k) / ka;
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) {
      if (a[m] == 0.0) continue;
      s += a[m] * miss_probability(holders[m], inst.links(), k);
    }
    total += wk * s;
  }
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// ClusterInstance

ClusterInstance::ClusterInstance(PreferenceMatrix prefs, std::vector<std::size_t> active,
                                 std::vector<double> weights, std::size_t cache_size,
                                 LinkProbabilityMatrix links, UtilityTriple utility)
    : prefs_(std::move(prefs)),
      active_(std::move(active)),
      cache_size_(cache_size),
      links_(std::move(links)),
      utility_(utility) {
  const std::size_t k_users = prefs_.users();
  if (k_users == 0) throw ParameterError("instance has no users");
  if (links_.users() != k_users)
    throw ParameterError("link matrix has " + std::to_string(links_.users()) +
                         " users, preferences have " + std::to_string(k_users));
  if (active_.empty()) throw ParameterError("instance needs at least one active user");
  if (!(cache_size_ < prefs_.files()))
    throw ParameterError("cache size S must be smaller than the library size M");
  if (weights.empty()) weights.assign(active_.size(), 1.0);
  if (weights.size() != active_.size())
    throw ParameterError("need one weight per active user");

  user_weight_.assign(k_users, 0.0);
  for (std::size_t i = 0; i < active_.size(); ++i) {
    std::size_t k = active_[i];
    if (k >= k_users) throw ParameterError("active user index out of range");
    if (user_weight_[k] > 0.0) throw ParameterError("active user listed twice");
    if (!(weights[i] > 0.0)) throw ParameterError("user weights must be positive");
    user_weight_[k] = weights[i];
  }
  std::ranges::sort(active_);
  for (std::size_t k = 0; k < k_users; ++k)
    if (user_weight_[k] == 0.0) inactive_.push_back(k);
  utility_.validate_for(active_.size());
}

ClusterInstance ClusterInstance::with_utility(const UtilityTriple& utility) const {
  utility.validate_for(active_count());
  ClusterInstance copy = *this;
  copy.utility_ = utility;
  return copy;
}

ClusterInstance ClusterInstance::with_preferences(PreferenceMatrix prefs) const {
  if (prefs.users() != users() || prefs.files() != files())
    throw ParameterError("replacement preferences have the wrong shape");
  ClusterInstance copy = *this;
  copy.prefs_ = std::move(prefs);
  return copy;
}

// ---------------------------------------------------------------------------
// CachingPolicy

CachingPolicy::CachingPolicy(Matrix entries, std::size_t cache_size)
    : entries_(std::move(entries)) {
  for (std::size_t k = 0; k < entries_.rows(); ++k) {
    double sum = 0.0;
    for (double b : entries_.row(k)) {
      if (!(b >= 0.0 && b <= 1.0)) throw ParameterError("caching probability outside [0,1]");
      sum += b;
    }
    if (sum > static_cast<double>(cache_size) + kStochasticTolerance)
      throw ParameterError("policy row " + std::to_string(k) + " caches " +
                           csv::format_double(sum) + " files, budget is " +
                           std::to_string(cache_size));
  }
}

CachingPolicy CachingPolicy::zeros(std::size_t users, std::size_t files) {
  return CachingPolicy(Matrix(users, files), 0);
}

void CachingPolicy::set_row(std::size_t user, std::span<const double> row) {
  if (row.size() != files()) throw ParameterError("policy row has the wrong length");
  for (double b : row)
    if (!(b >= 0.0 && b <= 1.0)) throw ParameterError("caching probability outside [0,1]");
  std::ranges::copy(row, entries_.row(user).begin());
}

bool CachingPolicy::is_integral() const {
  return std::ranges::all_of(entries_.data(), [](double b) { return b == 0.0 || b == 1.0; });
}

double CachingPolicy::row_sum(std::size_t user) const {
  auto r = row(user);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Closed forms

AccessProbabilities access_probabilities(const ClusterInstance& inst, const CachingPolicy& policy,
                                         std::size_t user, std::span<const std::uint8_t> link_up) {
  check_dimensions(inst, policy);
  if (user >= inst.users() || !inst.is_active(user))
    throw ParameterError("access probabilities are defined for active users only");
  if (link_up.size() != inst.users()) throw ParameterError("need one link indicator per user");
  if (link_up[user] != 1) throw ParameterError("a user's link to itself must be up");

  auto a = inst.preferences().row(user);
  AccessProbabilities p;
  for (std::size_t m = 0; m < inst.files(); ++m) {
    double only_bs = 1.0;
    for (std::size_t l = 0; l < inst.users(); ++l)
      if (link_up[l]) only_bs *= 1.0 - policy(l, m);
    p.bs += a[m] * only_bs;
    p.self += a[m] * policy(user, m);
  }
  p.self = std::min(p.self, 1.0);
  if (p.self + p.bs > 1.0) p.bs = 1.0 - p.self;
  p.d2d = 1.0 - (p.self + p.bs);
  return p;
}

double bs_access_mass(const ClusterInstance& inst, const CachingPolicy& policy) {
  check_dimensions(inst, policy);
  return bs_mass_from_holders(inst, holders_by_file(policy));
}

double expected_utility(const ClusterInstance& inst, const CachingPolicy& policy,
                        const UtilityTriple& u) {
  check_dimensions(inst, policy);
  const double ka = static_cast<double>(inst.active_count());
  const double bs_mass = bs_mass_from_holders(inst, holders_by_file(policy));
  const double self_mass = self_access_mass(inst, policy);
  return total_active_weight(inst) * u.u_d / ka + (u.u_b - u.u_d) * bs_mass +
         (ka * u.u_s - u.u_d) * self_mass;
}

double expected_utility(const ClusterInstance& inst, const CachingPolicy& policy) {
  return expected_utility(inst, policy, inst.utility());
}

namespace {

std::vector<double> payoffs_with_holders(const ClusterInstance& inst, const HolderLists& holders,
                                         std::size_t user) {
  const UtilityTriple& u = inst.utility();
  const double ka = static_cast<double>(inst.active_count());
  const auto& links = inst.links();
  std::vector<double> payoff(inst.files(), 0.0);
  for (std::size_t k : inst.active_users()) {
    const double link = links(k, user);
    if (link == 0.0) continue;
    auto a = inst.preferences().row(k);
    const double wk = inst.weight(k) / ka;
    for (std::size_t m = 0; m < payoff.size(); ++m) {
      if (a[m] == 0.0) continue;
      payoff[m] += wk * a[m] * link * miss_probability(holders[m], links, k, user);
    }
  }
  for (double& p : payoff) p *= u.u_d - u.u_b;
  if (inst.is_active(user)) {
    auto a = inst.preferences().row(user);
    const double self_gain = (ka * u.u_s - u.u_d) * inst.weight(user) / ka;
    for (std::size_t m = 0; m < payoff.size(); ++m) payoff[m] += self_gain * a[m];
  }
  return payoff;
}

}  // namespace

std::vector<double> best_response_payoffs(const ClusterInstance& inst,
                                          const CachingPolicy& policy, std::size_t user) {
  check_dimensions(inst, policy);
  if (user >= inst.users()) throw ParameterError("user index out of range");
  return payoffs_with_holders(inst, holders_by_file(policy), user);
}

Matrix utility_gradient(const ClusterInstance& inst, const CachingPolicy& policy) {
  check_dimensions(inst, policy);
  const HolderLists holders = holders_by_file(policy);
  Matrix grad(inst.users(), inst.files());
  for (std::size_t j = 0; j < inst.users(); ++j) {
    auto g = payoffs_with_holders(inst, holders, j);
    std::ranges::copy(g, grad.row(j).begin());
  }
  return grad;
}

std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count) {
  count = std::min(count, values.size());
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  };
  std::ranges::partial_sort(idx, idx.begin() + static_cast<std::ptrdiff_t>(count), better);
  idx.resize(count);
  std::ranges::sort(idx);
  return idx;
}

std::vector<double> best_response(const ClusterInstance& inst, const CachingPolicy& policy,
                                  std::size_t user) {
  auto payoff = best_response_payoffs(inst, policy, user);
  std::vector<double> row(inst.files(), 0.0);
  for (std::size_t m : top_indices(payoff, inst.cache_size())) row[m] = 1.0;
  return row;
}

bool is_best_response_fixed_point(const ClusterInstance& inst, const CachingPolicy& policy) {
  for (std::size_t k = 0; k < inst.users(); ++k) {
    auto br = best_response(inst, policy, k);
    if (!std::ranges::equal(br, policy.row(k))) return false;
  }
  return true;
}

double stationarity_residual(const ClusterInstance& inst, const CachingPolicy& policy) {
  check_dimensions(inst, policy);
  const HolderLists holders = holders_by_file(policy);
  const double budget = static_cast<double>(inst.cache_size());
  double worst = 0.0;
  for (std::size_t j = 0; j < inst.users(); ++j) {
    auto g = payoffs_with_holders(inst, holders, j);
    auto b = policy.row(j);
    double best_open = -std::numeric_limits<double>::infinity();
    double worst_used = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < g.size(); ++m) {
      if (b[m] < 1.0) best_open = std::max(best_open, g[m]);
      if (b[m] > 0.0) worst_used = std::min(worst_used, g[m]);
    }
    if (std::isfinite(best_open) && std::isfinite(worst_used))
      worst = std::max(worst, best_open - worst_used);
    if (policy.row_sum(j) < budget - kStochasticTolerance && std::isfinite(best_open))
      worst = std::max(worst, best_open);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Iterative design

std::vector<std::size_t> default_update_order(const ClusterInstance& inst) {
  std::vector<std::size_t> order = inst.active_users();
  order.insert(order.end(), inst.inactive_users().begin(), inst.inactive_users().end());
  return order;
}

CachingPolicy initial_policy(const ClusterInstance& inst, InitKind kind) {
  Matrix b(inst.users(), inst.files());
  if (kind == InitKind::selfish) {
    for (std::size_t k : inst.active_users())
      for (std::size_t m : top_indices(inst.preferences().row(k), inst.cache_size())) b(k, m) = 1.0;
  }
  return CachingPolicy(std::move(b), inst.cache_size());
}

OptimizerReport optimize(const ClusterInstance& inst, const CachingPolicy& init,
                         const OptimizeOptions& options) {
  check_dimensions(inst, init);
  for (std::size_t k = 0; k < init.users(); ++k)
    if (init.row_sum(k) > static_cast<double>(inst.cache_size()) + kStochasticTolerance)
      throw ParameterError("initial policy row " + std::to_string(k) + " exceeds the cache budget");

  std::vector<std::size_t> order = options.order.empty() ? default_update_order(inst) : options.order;
  for (std::size_t k : order)
    if (k >= inst.users()) throw ParameterError("update order names an unknown user");
  const std::size_t max_rounds = options.max_rounds ? options.max_rounds : 10 * inst.users();

  OptimizerReport report;
  report.policy = init;
  report.utility_trace.push_back(expected_utility(inst, report.policy));

  for (std::size_t round = 0; round < max_rounds; ++round) {
    const Matrix before = report.policy.entries();
    for (std::size_t user : order) {
      report.policy.set_row(user, best_response(inst, report.policy, user));
      report.utility_trace.push_back(expected_utility(inst, report.policy));
      ++report.iterations;
    }
    ++report.rounds;
    double change = 0.0;
    auto now = report.policy.entries().data();
    auto then = before.data();
    for (std::size_t i = 0; i < now.size(); ++i) change += (now[i] - then[i]) * (now[i] - then[i]);
    if (change <= options.change_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.stationarity_residual = stationarity_residual(inst, report.policy);
  return report;
}

NetworkMetrics evaluate_metrics(const ClusterInstance& inst, const CachingPolicy& policy,
                                const MetricConstants& mc) {
  check_dimensions(inst, policy);
  const double ka = static_cast<double>(inst.active_count());
  const double bs_mass = bs_access_mass(inst, policy);
  const double self_mass = self_access_mass(inst, policy);
  const double base = total_active_weight(inst) / ka;
  NetworkMetrics out;
  out.throughput = base * mc.t_d + (mc.t_b - mc.t_d) * bs_mass + (ka * mc.t_s - mc.t_d) * self_mass;
  out.cost = base * mc.c_d + (mc.c_b - mc.c_d) * bs_mass + (ka * mc.c_s - mc.c_d) * self_mass;
  out.hit_rate = base - bs_mass;
  out.ee = out.cost > 0.0 ? out.throughput / out.cost : std::numeric_limits<double>::infinity();
  return out;
}

EeResult optimize_ee(const ClusterInstance& inst, const MetricConstants& mc,
                     const EeOptions& options) {
  if (!(mc.c_b > 0.0)) throw ParameterError("EE design needs a positive BS cost");
  const ClusterInstance throughput_inst = inst.with_utility(throughput_objective(mc));
  OptimizerReport start =
      optimize(throughput_inst, initial_policy(throughput_inst, options.init), options.inner);

  EeResult result;
  CachingPolicy current = start.policy;
  NetworkMetrics metrics = evaluate_metrics(inst, current, mc);
  // Every request self-served: EE is unbounded and nothing can beat it.
  if (metrics.cost <= 0.0) {
    result.t_star = metrics.ee;
    result.t_trace.push_back(metrics.ee);
    result.report = std::move(start);
    return result;
  }
  double t = metrics.throughput / metrics.cost;
  result.t_trace.push_back(t);

  for (std::size_t outer = 0; outer < options.max_outer_iterations; ++outer) {
    const ClusterInstance surrogate = inst.with_utility(ee_weighted_objective(mc, t));
    OptimizerReport step = optimize(surrogate, current, options.inner);
    metrics = evaluate_metrics(inst, step.policy, mc);
    ++result.outer_iterations;
    const double gap = metrics.throughput - t * metrics.cost;
    if (metrics.cost <= 0.0) {
      result.report = std::move(step);
      result.t_star = metrics.ee;
      result.t_trace.push_back(metrics.ee);
      return result;
    }
    if (gap <= options.tolerance * metrics.cost) {
      result.report = std::move(step);
      result.t_star = t;
      return result;
    }
    current = step.policy;
    t = metrics.throughput / metrics.cost;
    result.t_trace.push_back(t);
  }
  throw NumericalError("Dinkelbach iteration did not reach its tolerance within " +
                       std::to_string(options.max_outer_iterations) + " outer iterations (t = " +
                       csv::format_double(t) + ")");
}

// ---------------------------------------------------------------------------
// Serialization

void OptimizerReport::write_json(std::ostream& out) const {
  nlohmann::ordered_json j;
  j["iterations"] = iterations;
  j["rounds"] = rounds;
  j["converged"] = converged;
  j["stationarity_residual"] = stationarity_residual;
  j["final_utility"] = utility_trace.empty() ? 0.0 : utility_trace.back();
  j["utility_trace"] = utility_trace;
  out << j.dump(2) << '\n';
}

void write_policy_csv(std::ostream& out, const CachingPolicy& policy) {
  std::vector<std::string> header;
  for (std::size_t m = 0; m < policy.files(); ++m) header.push_back("file_" + std::to_string(m));
  csv::write_matrix(out, header, policy.entries());
}

CachingPolicy read_policy_csv(std::istream& in, std::size_t cache_size) {
  return CachingPolicy(csv::read_matrix(in), cache_size);
}

}  // namespace d2dcache
