#pragma once

#include <cstddef>
#include <vector>

#include "d2dcache/matrix.hpp"
#include "d2dcache/random.hpp"

namespace d2dcache {

double db_to_linear(double db);
double linear_to_db(double linear);
/// Milliwatts.
double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

/// Radio constants of the D2D cluster. Power quantities are kept in dBm and
/// converted to milliwatts at the point of use.
struct RadioParams {
  double carrier_freq_hz = 2e9;
  double breakpoint_d0_m = 10.0;
  double pathloss_exponent_alpha = 3.68;
  double shadow_mu_db = 0.0;
  double shadow_sigma_db = 8.0;
  double noise_psd_dbm_hz = -174.0;
  double d2d_bandwidth_hz = 20e6;
  double bs_bandwidth_hz = 200e3;
  double d2d_tx_power_dbm = 20.0;
  double bs_tx_power_dbm = 26.0;
  double min_snr_db = 5.0;

  void validate() const;

  double wavelength_m() const;
  /// sigma_n^2 = N_0 * B_D, in mW.
  double noise_power_mw() const;
  /// 2^C - 1, i.e. the linear minimum SNR.
  double snr_threshold() const;
  /// Minimum D2D spectral efficiency C = log2(1 + SNR_min), bits/s/Hz.
  double min_rate_bps_hz() const;
};

/// Pairwise D2D link success probabilities L_{k,l}; unit diagonal.
class LinkProbabilityMatrix {
 public:
  LinkProbabilityMatrix() = default;
  /// Throws ParameterError unless entries are in [0,1] and the diagonal is 1.
  explicit LinkProbabilityMatrix(Matrix entries);

  /// K x K matrix with every off-diagonal entry equal to `value`.
  static LinkProbabilityMatrix uniform(std::size_t users, double value);

  std::size_t users() const noexcept { return entries_.rows(); }
  double operator()(std::size_t k, std::size_t l) const { return entries_(k, l); }
  const Matrix& entries() const noexcept { return entries_; }

 private:
  Matrix entries_;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct UserLayout {
  std::vector<Point> positions;
  double side_m = 0.0;

  void validate() const;
  double distance(std::size_t k, std::size_t l) const;
};

double pathloss_db(double distance_m, const RadioParams& rp);
/// Linear power gain 10^(-PL/10); distances below d0 are clamped to d0.
double pathgain(double distance_m, const RadioParams& rp);

/// Rayleigh success probability for a link with the given mean received
/// SNR (linear): Pr[|h|^2 * mean_snr > threshold].
double rayleigh_success(double mean_snr, double threshold);

/// Case 1: effective link-quality control, every link succeeds.
LinkProbabilityMatrix link_prob_case1(std::size_t users);

/// Case 2: deterministic positions and shadowing, Rayleigh small-scale fading.
/// `shadow_gains` holds linear shadowing power gains s_{k,l}.
LinkProbabilityMatrix link_prob_case2(const UserLayout& layout, const Matrix& shadow_gains,
                                      const RadioParams& rp);

/// Density of the distance between two independent uniform points in the
/// unit square, x in [0, sqrt 2]. Throws DomainError outside.
double square_distance_pdf(double x);

struct QuadratureOptions {
  double abs_tolerance = 1e-6;
  /// Half-width of the shadowing integration window in standard deviations.
  double shadow_sigmas = 6.0;
  unsigned max_depth = 18;
};

/// Case 3: users uniform in a D x D square with lognormal shadowing and
/// Rayleigh fading. Returns the pair-independent success probability.
/// Throws NumericalError when the adaptive quadrature misses its tolerance.
double link_prob_case3(double side_m, const RadioParams& rp, const QuadratureOptions& opts = {});

/// Case-2 kernel averaged over distance only (no shadowing), the sigma -> 0
/// limit of Case 3.
double link_prob_distance_only(double side_m, const RadioParams& rp,
                               const QuadratureOptions& opts = {});

/// D2D transmit power (dBm) keeping inter-cluster interference at nu for a
/// given cluster side and frequency-reuse factor. reuse_factor == 1 gives
/// zero power, i.e. -inf dBm.
double power_control_dbm(double side_m, const RadioParams& rp, double reuse_factor);

UserLayout draw_layout(std::size_t users, double side_m, Rng& rng);
/// Symmetric K x K linear shadowing gains, unit diagonal.
Matrix draw_shadow_gains(std::size_t users, const RadioParams& rp, Rng& rng);

/// Instantaneous feasibility log2(1+SNR) > C for one link.
bool link_feasible(double distance_m, double shadow_gain, double fading_power,
                   const RadioParams& rp);

}  // namespace d2dcache
