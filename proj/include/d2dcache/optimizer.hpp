#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "d2dcache/channel.hpp"
#include "d2dcache/matrix.hpp"
#include "d2dcache/objectives.hpp"
#include "d2dcache/preference.hpp"

namespace d2dcache {

/// One cluster: who is active, what they want, how well they can reach each
/// other, how much each can cache, and what a served request is worth.
class ClusterInstance {
 public:
  /// `active` lists the active users (the rest are inactive); `weights` has
  /// one positive entry per active user in the order of `active`, or is empty
  /// for all-ones. Throws ParameterError on any inconsistency.
  ClusterInstance(PreferenceMatrix prefs, std::vector<std::size_t> active,
                  std::vector<double> weights, std::size_t cache_size,
                  LinkProbabilityMatrix links, UtilityTriple utility);

  std::size_t users() const noexcept { return prefs_.users(); }
  std::size_t files() const noexcept { return prefs_.files(); }
  std::size_t active_count() const noexcept { return active_.size(); }
  std::size_t inactive_count() const noexcept { return inactive_.size(); }
  std::size_t cache_size() const noexcept { return cache_size_; }

  const std::vector<std::size_t>& active_users() const noexcept { return active_; }
  const std::vector<std::size_t>& inactive_users() const noexcept { return inactive_; }
  bool is_active(std::size_t user) const { return user_weight_[user] > 0.0; }
  /// w_k for active users, 0 for inactive ones.
  double weight(std::size_t user) const { return user_weight_[user]; }

  const PreferenceMatrix& preferences() const noexcept { return prefs_; }
  const LinkProbabilityMatrix& links() const noexcept { return links_; }
  const UtilityTriple& utility() const noexcept { return utility_; }

  ClusterInstance with_utility(const UtilityTriple& utility) const;
  ClusterInstance with_preferences(PreferenceMatrix prefs) const;

 private:
  PreferenceMatrix prefs_;
  std::vector<std::size_t> active_;
  std::vector<std::size_t> inactive_;
  std::vector<double> user_weight_;
  std::size_t cache_size_;
  LinkProbabilityMatrix links_;
  UtilityTriple utility_;
};

/// Caching probabilities b_m^k, one row per user.
class CachingPolicy {
 public:
  CachingPolicy() = default;
  /// Throws ParameterError unless entries are in [0,1] and every row sums to
  /// at most `cache_size` (within kStochasticTolerance).
  CachingPolicy(Matrix entries, std::size_t cache_size);

  static CachingPolicy zeros(std::size_t users, std::size_t files);

  std::size_t users() const noexcept { return entries_.rows(); }
  std::size_t files() const noexcept { return entries_.cols(); }
  double operator()(std::size_t user, std::size_t file) const { return entries_(user, file); }
  std::span<const double> row(std::size_t user) const { return entries_.row(user); }
  const Matrix& entries() const noexcept { return entries_; }

  /// Replaces one user's row (no feasibility check beyond [0,1]).
  void set_row(std::size_t user, std::span<const double> row);

  bool is_integral() const;
  double row_sum(std::size_t user) const;

  friend bool operator==(const CachingPolicy&, const CachingPolicy&) = default;

 private:
  Matrix entries_;
};

struct AccessProbabilities {
  double bs = 0.0;
  double self = 0.0;
  double d2d = 0.0;
};

/// P_B, P_S, P_D of active user k for one realization of the link indicators
/// (indicator[k] must be 1). P_D is 1 - (P_S + P_B), so the three sum to one.
AccessProbabilities access_probabilities(const ClusterInstance& inst, const CachingPolicy& policy,
                                         std::size_t user, std::span<const std::uint8_t> link_up);

/// Closed-form expected network utility U_net under the instance's utility.
double expected_utility(const ClusterInstance& inst, const CachingPolicy& policy);
/// Same, with another utility triple.
double expected_utility(const ClusterInstance& inst, const CachingPolicy& policy,
                        const UtilityTriple& utility);

/// Sum over files of S_m: the expected weight of requests of the selected user
/// that end up on the BS link.
double bs_access_mass(const ClusterInstance& inst, const CachingPolicy& policy);

/// dU_net / db_m^j for every user j and file m.
Matrix utility_gradient(const ClusterInstance& inst, const CachingPolicy& policy);

/// Per-file payoff of caching for `user` given everyone else's policy; U_net
/// is affine in that user's row with exactly these coefficients.
std::vector<double> best_response_payoffs(const ClusterInstance& inst,
                                          const CachingPolicy& policy, std::size_t user);

/// Indices of the `count` largest values, ties to the lower index, ascending.
std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count);

/// 0/1 row caching the S files with the largest payoffs.
std::vector<double> best_response(const ClusterInstance& inst, const CachingPolicy& policy,
                                  std::size_t user);

/// True when no single user's best response changes the policy.
bool is_best_response_fixed_point(const ClusterInstance& inst, const CachingPolicy& policy);

/// Largest per-user KKT violation: max over users of (best uncached payoff -
/// worst cached payoff), clamped at 0. Zero at a stationary integral policy.
double stationarity_residual(const ClusterInstance& inst, const CachingPolicy& policy);

enum class InitKind { zeros, selfish };

struct OptimizeOptions {
  /// Update sequence for one round; empty means active users then inactive
  /// users, each in index order.
  std::vector<std::size_t> order;
  /// 0 means 10 * K rounds.
  std::size_t max_rounds = 0;
  /// Round-level stopping threshold on sum |b_new - b_old|^2.
  double change_tolerance = 1e-4;
};

struct OptimizerReport {
  CachingPolicy policy;
  /// U_net of the initial policy followed by U_net after every single-user update.
  std::vector<double> utility_trace;
  std::size_t iterations = 0;
  std::size_t rounds = 0;
  bool converged = false;
  double stationarity_residual = 0.0;

  void write_json(std::ostream& out) const;
};

std::vector<std::size_t> default_update_order(const ClusterInstance& inst);

CachingPolicy initial_policy(const ClusterInstance& inst, InitKind kind);

/// Iterative user-based design: repeated single-user best responses in the
/// given order until a full round leaves the policy unchanged.
OptimizerReport optimize(const ClusterInstance& inst, const CachingPolicy& init,
                         const OptimizeOptions& options = {});

struct EeOptions {
  /// Stop once T_net - t C_net <= tolerance * C_net (bits/J).
  double tolerance = 1e-6;
  std::size_t max_outer_iterations = 200;
  OptimizeOptions inner;
  InitKind init = InitKind::zeros;
};

struct EeResult {
  OptimizerReport report;
  double t_star = 0.0;
  std::vector<double> t_trace;
  std::size_t outer_iterations = 0;
};

/// Dinkelbach loop over the weighted surrogate T_net - t C_net, warm-started
/// from the throughput-optimal design. Each inner solve starts at the previous
/// policy, so T_net - t C_net stays nonnegative and t never decreases.
EeResult optimize_ee(const ClusterInstance& inst, const MetricConstants& mc,
                     const EeOptions& options = {});

struct NetworkMetrics {
  double throughput = 0.0;
  double cost = 0.0;
  double hit_rate = 0.0;
  /// +inf when cost is zero.
  double ee = 0.0;
};

NetworkMetrics evaluate_metrics(const ClusterInstance& inst, const CachingPolicy& policy,
                                const MetricConstants& mc);

void write_policy_csv(std::ostream& out, const CachingPolicy& policy);
CachingPolicy read_policy_csv(std::istream& in, std::size_t cache_size);

}  // namespace d2dcache
