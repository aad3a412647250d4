#include "d2dcache/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "d2dcache/error.hpp"

namespace d2dcache {

namespace {

constexpr double kSpeedOfLight = 3e8;
using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
constexpr double kRelativeTolerance = 1e-10;

struct IntegralResult {
  double value = 0.0;
  double error = 0.0;
};

template <class F>
IntegralResult integrate(F&& f, double a, double b, unsigned depth) {
  IntegralResult r;
  r.value = Kronrod::integrate(f, a, b, depth, kRelativeTolerance, &r.error);
  return r;
}

// Rayleigh success probability at normalized distance x for one shadowing gain.
struct OutageKernel {
  double threshold_over_tx;  // sigma_n^2 (2^C - 1) / E_D
  const RadioParams* rp;
  double side_m;

  double operator()(double normalized_distance, double shadow_gain) const {
    double pg = pathgain(side_m * normalized_distance, *rp);
    return std::exp(-threshold_over_tx / (shadow_gain * pg));
  }
};

double integrate_over_distance(const OutageKernel& kernel, const RadioParams& rp,
                               const QuadratureOptions& opts, bool with_shadowing) {
  double inner_error = 0.0;
  auto shadow_average = [&](double x) {
    if (!with_shadowing) return kernel(x, 1.0);
    const double sigma = rp.shadow_sigma_db;
    const double mu = rp.shadow_mu_db;
    auto integrand = [&](double z) {
      double s = db_to_linear(mu + sigma * z);
      return kernel(x, s) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    };
    auto r = integrate(integrand, -opts.shadow_sigmas, opts.shadow_sigmas, opts.max_depth);
    inner_error = std::max(inner_error, r.error);
    return r.value;
  };
  auto outer = [&](double x) { return shadow_average(x) * square_distance_pdf(x); };

  // The density has a kink at x = 1; integrate the two pieces separately.
  auto near = integrate(outer, 0.0, 1.0, opts.max_depth);
  auto far = integrate(outer, 1.0, std::numbers::sqrt2, opts.max_depth);
  double estimate = near.error + far.error + inner_error;
  if (!(estimate <= opts.abs_tolerance) || !std::isfinite(near.value + far.value)) {
    std::ostringstream msg;
    msg << "link quadrature did not converge: side=" << kernel.side_m
        << " m, E_D=" << rp.d2d_tx_power_dbm << " dBm, error estimate=" << estimate
        << " (outer " << near.error << " + " << far.error << ", inner " << inner_error
        << "), tolerance=" << opts.abs_tolerance;
    throw NumericalError(msg.str());
  }
  return std::clamp(near.value + far.value, 0.0, 1.0);
}

}  // namespace

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }
double dbm_to_mw(double dbm) { return db_to_linear(dbm); }
double mw_to_dbm(double mw) { return linear_to_db(mw); }

void RadioParams::validate() const {
  if (!(carrier_freq_hz > 0)) throw ParameterError("carrier_freq_hz must be > 0");
  if (!(breakpoint_d0_m > 0)) throw ParameterError("breakpoint_d0_m must be > 0");
  if (!(d2d_bandwidth_hz > 0)) throw ParameterError("d2d_bandwidth_hz must be > 0");
  if (!(bs_bandwidth_hz > 0)) throw ParameterError("bs_bandwidth_hz must be > 0");
  if (!(pathloss_exponent_alpha > 2)) throw ParameterError("pathloss_exponent_alpha must be > 2");
  if (!(shadow_sigma_db >= 0)) throw ParameterError("shadow_sigma_db must be >= 0");
}

double RadioParams::wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }

double RadioParams::noise_power_mw() const {
  return dbm_to_mw(noise_psd_dbm_hz) * d2d_bandwidth_hz;
}

double RadioParams::snr_threshold() const { return db_to_linear(min_snr_db); }

double RadioParams::min_rate_bps_hz() const { return std::log2(1.0 + snr_threshold()); }

LinkProbabilityMatrix::LinkProbabilityMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) throw ParameterError("link matrix must be square");
  for (std::size_t k = 0; k < entries_.rows(); ++k) {
    if (entries_(k, k) != 1.0) throw ParameterError("link matrix diagonal must be 1");
    for (std::size_t l = 0; l < entries_.cols(); ++l) {
      double v = entries_(k, l);
      if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("link probability outside [0,1]");
    }
  }
}

LinkProbabilityMatrix LinkProbabilityMatrix::uniform(std::size_t users, double value) {
  Matrix m(users, users, value);
  for (std::size_t k = 0; k < users; ++k) m(k, k) = 1.0;
  return LinkProbabilityMatrix(std::move(m));
}

void UserLayout::validate() const {
  if (!(side_m > 0)) throw ParameterError("cluster side must be > 0");
  for (const auto& p : positions)
    if (p.x < 0 || p.x > side_m || p.y < 0 || p.y > side_m)
      throw ParameterError("user position outside the cluster square");
}

double UserLayout::distance(std::size_t k, std::size_t l) const {
  return std::hypot(positions[k].x - positions[l].x, positions[k].y - positions[l].y);
}

double pathloss_db(double distance_m, const RadioParams& rp) {
  const double d0 = rp.breakpoint_d0_m;
  const double d = std::max(distance_m, d0);
  return 20.0 * std::log10(4.0 * std::numbers::pi * d0 / rp.wavelength_m()) +
         10.0 * rp.pathloss_exponent_alpha * std::log10(d / d0);
}

double pathgain(double distance_m, const RadioParams& rp) {
  return db_to_linear(-pathloss_db(distance_m, rp));
}

double rayleigh_success(double mean_snr, double threshold) {
  if (mean_snr <= 0.0) return 0.0;
  return std::exp(-threshold / mean_snr);
}

LinkProbabilityMatrix link_prob_case1(std::size_t users) {
  return LinkProbabilityMatrix::uniform(users, 1.0);
}

LinkProbabilityMatrix link_prob_case2(const UserLayout& layout, const Matrix& shadow_gains,
                                      const RadioParams& rp) {
  const std::size_t k_users = layout.positions.size();
  if (shadow_gains.rows() != k_users || shadow_gains.cols() != k_users)
    throw ParameterError("shadow gain matrix does not match the layout");
  const double tx_mw = dbm_to_mw(rp.d2d_tx_power_dbm);
  const double noise = rp.noise_power_mw();
  const double threshold = rp.snr_threshold();
  Matrix m(k_users, k_users, 1.0);
  for (std::size_t k = 0; k < k_users; ++k) {
    for (std::size_t l = 0; l < k_users; ++l) {
      if (k == l) continue;
      double s = shadow_gains(k, l);
      if (!(s > 0.0)) throw ParameterError("shadow gains must be positive");
      if (s != shadow_gains(l, k)) throw ParameterError("shadow gains must be symmetric");
      double mean_snr = tx_mw * s * pathgain(layout.distance(k, l), rp) / noise;
      m(k, l) = rayleigh_success(mean_snr, threshold);
    }
  }
  return LinkProbabilityMatrix(std::move(m));
}

double square_distance_pdf(double x) {
  if (!(x >= 0.0 && x <= std::numbers::sqrt2))
    throw DomainError("normalized distance outside [0, sqrt 2]");
  if (x <= 1.0) return 2.0 * x * (std::numbers::pi + x * x - 4.0 * x);
  const double x2 = x * x;
  const double arg = std::clamp((2.0 - x2) / x2, -1.0, 1.0);
  return 2.0 * x * (-2.0 - x2 + 4.0 * std::sqrt(x2 - 1.0) + 2.0 * std::asin(arg));
}

double link_prob_case3(double side_m, const RadioParams& rp, const QuadratureOptions& opts) {
  if (!(side_m > 0)) throw ParameterError("cluster side must be > 0");
  rp.validate();
  OutageKernel kernel{rp.noise_power_mw() * rp.snr_threshold() / dbm_to_mw(rp.d2d_tx_power_dbm),
                      &rp, side_m};
  return integrate_over_distance(kernel, rp, opts, rp.shadow_sigma_db > 0.0);
}

double link_prob_distance_only(double side_m, const RadioParams& rp,
                               const QuadratureOptions& opts) {
  if (!(side_m > 0)) throw ParameterError("cluster side must be > 0");
  OutageKernel kernel{rp.noise_power_mw() * rp.snr_threshold() / dbm_to_mw(rp.d2d_tx_power_dbm),
                      &rp, side_m};
  return integrate_over_distance(kernel, rp, opts, false);
}

double power_control_dbm(double side_m, const RadioParams& rp, double reuse_factor) {
  if (!(side_m > 0)) throw ParameterError("cluster side must be > 0");
  if (!(reuse_factor >= 1)) throw ParameterError("reuse_factor must be >= 1");
  const double d0 = rp.breakpoint_d0_m;
  const double alpha = rp.pathloss_exponent_alpha;
  const double nu_mw = std::pow(2.0, alpha / 2.0) * rp.noise_power_mw();
  const double spacing = (std::sqrt(reuse_factor) - 1.0) * side_m / d0;
  const double near_field = 4.0 * std::numbers::pi * d0 / rp.wavelength_m();
  return mw_to_dbm(std::pow(spacing, alpha) * near_field * near_field * nu_mw);
}

UserLayout draw_layout(std::size_t users, double side_m, Rng& rng) {
  UserLayout layout;
  layout.side_m = side_m;
  layout.positions.resize(users);
  for (auto& p : layout.positions) {
    p.x = side_m * uniform01(rng);
    p.y = side_m * uniform01(rng);
  }
  return layout;
}

Matrix draw_shadow_gains(std::size_t users, const RadioParams& rp, Rng& rng) {
  Matrix s(users, users, 1.0);
  std::normal_distribution<double> shadow_db(rp.shadow_mu_db, rp.shadow_sigma_db);
  for (std::size_t k = 0; k < users; ++k)
    for (std::size_t l = k + 1; l < users; ++l) {
      double g = rp.shadow_sigma_db > 0 ? db_to_linear(shadow_db(rng)) : db_to_linear(rp.shadow_mu_db);
      s(k, l) = g;
      s(l, k) = g;
    }
  return s;
}

bool link_feasible(double distance_m, double shadow_gain, double fading_power,
                   const RadioParams& rp) {
  double snr = dbm_to_mw(rp.d2d_tx_power_dbm) * fading_power * shadow_gain *
               pathgain(distance_m, rp) / rp.noise_power_mw();
  return snr > rp.snr_threshold();
}

}  // namespace d2dcache
