#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "d2dcache/channel.hpp"

namespace d2dcache {

/// Per-request payoff of BS-link, D2D-link and self-cache service.
struct UtilityTriple {
  double u_b = 0.0;
  double u_d = 0.0;
  double u_s = 0.0;

  /// Throws ParameterError unless u_b <= u_d <= u_s.
  void validate() const;
  bool ordered() const noexcept { return u_b <= u_d && u_d <= u_s; }
  /// u_b <= u_d <= K_A u_s: every best-response payoff coefficient is
  /// nonnegative. Weaker than ordered(); the hit-rate and tradeoff triples
  /// need it.
  bool admissible(std::size_t active_users) const noexcept {
    return u_b <= u_d && u_d <= static_cast<double>(active_users) * u_s;
  }
  /// Throws ParameterError unless admissible(active_users).
  void validate_for(std::size_t active_users) const;

  friend bool operator==(const UtilityTriple&, const UtilityTriple&) = default;
};

/// Throughputs (bits/s) and costs (W) of the three access modes, plus the
/// throughput/hit-rate tradeoff weight.
struct MetricConstants {
  double t_b = 0.0;
  double t_d = 0.0;
  double t_s = 0.0;
  double c_b = 0.0;
  double c_d = 0.0;
  double c_s = 0.0;
  double zeta = 0.0;

  void validate() const;
};

/// T_D = B_D R_min, T_B = B_B R_min, T_S = self_factor * T_D; C_B = E_B,
/// C_D = E_D (both in W), C_S = 0.
MetricConstants default_metric_constants(const RadioParams& rp, double self_factor = 2.0);

UtilityTriple throughput_objective(const MetricConstants& mc);
/// (-C_B, -C_D, -C_S): maximizing it minimizes the expected cost.
UtilityTriple cost_objective(const MetricConstants& mc);
UtilityTriple hitrate_objective(std::size_t active_users);
/// Maximizes T_net + zeta T_D K_A H_net.
UtilityTriple tradeoff_objective(const MetricConstants& mc, std::size_t active_users);
/// w_T T_net - w_C C_net. Throws ParameterError if the result is not ordered.
UtilityTriple weighted_objective(const MetricConstants& mc, double w_throughput, double w_cost);
/// Dinkelbach surrogate T_net - t C_net. Throws RangeError (carrying t) when
/// the ordering breaks at this t.
UtilityTriple ee_weighted_objective(const MetricConstants& mc, double t);

enum class ObjectiveKind { throughput, cost, hitrate, tradeoff, ee };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::throughput;
  double zeta = 0.0;  // tradeoff only

  /// Canonical text form: throughput | cost | hitrate | tradeoff(z) | ee.
  std::string name() const;
  friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

/// Parses the canonical text form; throws ParameterError on anything else.
ObjectiveSpec parse_objective(std::string_view text);

/// Utility triple for a non-EE objective (EE needs the Dinkelbach loop).
UtilityTriple make_objective(const ObjectiveSpec& spec, const MetricConstants& mc,
                             std::size_t active_users);

}  // namespace d2dcache
