#include "d2dcache/objectives.hpp"

#include <charconv>
#include <cmath>

#include "d2dcache/csv.hpp"
#include "d2dcache/error.hpp"

namespace d2dcache {

void UtilityTriple::validate() const {
  if (!ordered())
    throw ParameterError("utility triple must satisfy u_b <= u_d <= u_s (got " +
                         csv::format_double(u_b) + ", " + csv::format_double(u_d) + ", " +
                         csv::format_double(u_s) + ")");
}

void UtilityTriple::validate_for(std::size_t active_users) const {
  if (!admissible(active_users))
    throw ParameterError("utility triple must satisfy u_b <= u_d <= K_A u_s (got " +
                         csv::format_double(u_b) + ", " + csv::format_double(u_d) + ", " +
                         csv::format_double(u_s) + ", K_A = " + std::to_string(active_users) +
                         ")");
}

void MetricConstants::validate() const {
  if (!(t_b <= t_d && t_d <= t_s)) throw ParameterError("throughputs must satisfy t_b <= t_d <= t_s");
  if (!(c_b >= c_d && c_d >= c_s && c_s >= 0.0))
    throw ParameterError("costs must satisfy c_b >= c_d >= c_s >= 0");
}

MetricConstants default_metric_constants(const RadioParams& rp, double self_factor) {
  MetricConstants mc;
  const double r_min = rp.min_rate_bps_hz();
  mc.t_d = rp.d2d_bandwidth_hz * r_min;
  mc.t_b = rp.bs_bandwidth_hz * r_min;
  mc.t_s = self_factor * mc.t_d;
  mc.c_b = dbm_to_mw(rp.bs_tx_power_dbm) * 1e-3;
  mc.c_d = dbm_to_mw(rp.d2d_tx_power_dbm) * 1e-3;
  mc.c_s = 0.0;
  return mc;
}

UtilityTriple throughput_objective(const MetricConstants& mc) {
  UtilityTriple u{mc.t_b, mc.t_d, mc.t_s};
  if (!u.ordered()) throw ParameterError("throughputs must satisfy t_b <= t_d <= t_s");
  return u;
}

UtilityTriple cost_objective(const MetricConstants& mc) {
  if (!(mc.c_b >= mc.c_d && mc.c_d >= mc.c_s))
    throw ParameterError("costs must satisfy c_b >= c_d >= c_s");
  return {-mc.c_b, -mc.c_d, -mc.c_s};
}

UtilityTriple hitrate_objective(std::size_t active_users) {
  if (active_users < 1) throw ParameterError("hit-rate objective needs K_A >= 1");
  return {0.0, 1.0, 1.0 / static_cast<double>(active_users)};
}

UtilityTriple tradeoff_objective(const MetricConstants& mc, std::size_t active_users) {
  UtilityTriple u = throughput_objective(mc);
  const double ka = static_cast<double>(active_users);
  u.u_d += mc.zeta * ka * mc.t_d;
  u.u_s += mc.zeta * mc.t_d;
  u.validate_for(active_users);
  return u;
}

UtilityTriple weighted_objective(const MetricConstants& mc, double w_throughput, double w_cost) {
  if (!(w_throughput >= 0.0 && w_cost >= 0.0))
    throw ParameterError("objective weights must be nonnegative");
  UtilityTriple u{w_throughput * mc.t_b - w_cost * mc.c_b,
                  w_throughput * mc.t_d - w_cost * mc.c_d,
                  w_throughput * mc.t_s - w_cost * mc.c_s};
  u.validate();
  return u;
}

UtilityTriple ee_weighted_objective(const MetricConstants& mc, double t) {
  if (!(t >= 0.0)) throw RangeError("EE guess t must be >= 0", t);
  UtilityTriple u{mc.t_b - t * mc.c_b, mc.t_d - t * mc.c_d, mc.t_s - t * mc.c_s};
  if (!u.ordered())
    throw RangeError("EE surrogate loses the u_b <= u_d <= u_s ordering at t = " +
                         csv::format_double(t),
                     t);
  return u;
}

std::string ObjectiveSpec::name() const {
  switch (kind) {
    case ObjectiveKind::throughput: return "throughput";
    case ObjectiveKind::cost: return "cost";
    case ObjectiveKind::hitrate: return "hitrate";
    case ObjectiveKind::tradeoff: return "tradeoff(" + csv::format_double(zeta) + ")";
    case ObjectiveKind::ee: return "ee";
  }
  return "?";
}

ObjectiveSpec parse_objective(std::string_view text) {
  if (text == "throughput") return {ObjectiveKind::throughput};
  if (text == "cost") return {ObjectiveKind::cost};
  if (text == "hitrate") return {ObjectiveKind::hitrate};
  if (text == "ee") return {ObjectiveKind::ee};
  constexpr std::string_view prefix = "tradeoff(";
  if (text.starts_with(prefix) && text.ends_with(")")) {
    auto inner = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    double zeta = 0.0;
    auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), zeta);
    if (ec == std::errc{} && ptr == inner.data() + inner.size() && zeta >= 0.0 &&
        std::isfinite(zeta))
      return {ObjectiveKind::tradeoff, zeta};
  }
  throw ParameterError("unknown objective '" + std::string(text) +
                       "' (expected throughput | cost | hitrate | tradeoff(zeta) | ee)");
}

UtilityTriple make_objective(const ObjectiveSpec& spec, const MetricConstants& mc,
                             std::size_t active_users) {
  switch (spec.kind) {
    case ObjectiveKind::throughput: return throughput_objective(mc);
    case ObjectiveKind::cost: return cost_objective(mc);
    case ObjectiveKind::hitrate: return hitrate_objective(active_users);
    case ObjectiveKind::tradeoff: {
      MetricConstants with_zeta = mc;
      with_zeta.zeta = spec.zeta;
      return tradeoff_objective(with_zeta, active_users);
    }
    case ObjectiveKind::ee: break;
  }
  throw ParameterError("the ee objective has no fixed utility triple; use optimize_ee");
}

}  // namespace d2dcache
