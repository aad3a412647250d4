#include <cmath>
#include <random>

#include "channel_oracle.hpp"
#include "doctest.h"
#include "d2dcache/channel.hpp"
#include "d2dcache/error.hpp"

using namespace d2dcache;
namespace co = channel_oracle;

namespace {

void require_valid_links(const LinkProbabilityMatrix& l) {
  for (std::size_t k = 0; k < l.users(); ++k) {
    REQUIRE(l(k, k) == 1.0);
    for (std::size_t j = 0; j < l.users(); ++j) {
      REQUIRE(l(k, j) >= 0.0);
      REQUIRE(l(k, j) <= 1.0);
    }
  }
}

}  // namespace

TEST_CASE("pathloss at the breakpoint and at 100 m") {
  RadioParams rp;
  CHECK(std::abs(pathloss_db(10.0, rp) - 58.47) < 0.01);
  CHECK(std::abs(pathloss_db(10.0, rp) - static_cast<double>(co::pathloss_db_ld(10.0L, rp))) < 1e-12);
  CHECK(pathgain(10.0, rp) == doctest::Approx(1.42e-6).epsilon(1e-2));
  CHECK(std::abs(pathloss_db(100.0, rp) - pathloss_db(10.0, rp) - 36.8) < 1e-12);
  CHECK(std::abs(pathgain(100.0, rp) / co::gain(100.0, rp) - 1.0) < 1e-12);
}

TEST_CASE("pathloss clamps below the breakpoint and is linear in alpha") {
  RadioParams rp;
  CHECK(pathloss_db(0.0, rp) == pathloss_db(10.0, rp));
  CHECK(pathloss_db(3.0, rp) == pathloss_db(10.0, rp));
  RadioParams doubled = rp;
  doubled.pathloss_exponent_alpha = 2 * rp.pathloss_exponent_alpha;
  const double base = pathloss_db(10.0, rp);
  CHECK(pathloss_db(50.0, doubled) - base ==
        doctest::Approx(2 * (pathloss_db(50.0, rp) - base)).epsilon(1e-12));
}

TEST_CASE("case 1 is all ones") {
  const auto l = link_prob_case1(3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 3; ++j) CHECK(l(k, j) == 1.0);
  CHECK(link_prob_case1(1)(0, 0) == 1.0);
}

TEST_CASE("case 2 kernel at the mean power is exp(-1)") {
  RadioParams rp;
  UserLayout layout{{{0.0, 0.0}, {30.0, 40.0}}, 50.0};
  const double mean_snr_unit = co::gain(50.0, rp) / co::theta(rp);
  Matrix s(2, 2, 1.0);
  s(0, 1) = s(1, 0) = 1.0 / mean_snr_unit;
  const auto l = link_prob_case2(layout, s, rp);
  require_valid_links(l);
  CHECK(l(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(l(1, 0) == l(0, 1));

  RadioParams loud = rp;
  loud.d2d_tx_power_dbm = 200.0;
  Matrix ones(2, 2, 1.0);
  CHECK(link_prob_case2(layout, ones, loud)(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("case 2 matches Rayleigh Monte Carlo") {
  RadioParams rp;
  Rng rng(7);
  const UserLayout layout = draw_layout(4, 80.0, rng);
  const Matrix s = draw_shadow_gains(4, rp, rng);
  const auto l = link_prob_case2(layout, s, rp);
  require_valid_links(l);
  std::mt19937_64 mc(11);
  std::exponential_distribution<double> fade(1.0);
  const std::size_t n = 1'000'000;
  const double th = co::theta(rp);
  for (auto [k, j] : {std::pair{0, 1}, std::pair{1, 3}, std::pair{2, 3}}) {
    const double mean_gain = s(k, j) * co::gain(layout.distance(k, j), rp);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += mean_gain * fade(mc) > th;
    const double p = static_cast<double>(hits) / n;
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    CHECK(std::abs(l(k, j) - p) <= 3 * se);
  }
}

TEST_CASE("case 2 rejects bad shadow gains") {
  RadioParams rp;
  UserLayout layout{{{0.0, 0.0}, {1.0, 1.0}}, 5.0};
  Matrix s(2, 2, 1.0);
  s(0, 1) = s(1, 0) = 0.0;
  CHECK_THROWS_AS(link_prob_case2(layout, s, rp), ParameterError);
  s(0, 1) = 2.0;
  s(1, 0) = 1.0;
  CHECK_THROWS_AS(link_prob_case2(layout, s, rp), ParameterError);
}

TEST_CASE("square distance density") {
  CHECK(square_distance_pdf(0.0) == 0.0);
  CHECK_THROWS_AS(square_distance_pdf(-0.1), DomainError);
  CHECK_THROWS_AS(square_distance_pdf(1.5), DomainError);
  for (double x : {0.1, 0.5, 0.99, 1.0, 1.2, 1.4})
    CHECK(square_distance_pdf(x) == doctest::Approx(co::pdf(x)).epsilon(1e-14));
  const double mass = co::integrate_pdf([](double) { return 1.0; });
  const double mean = co::integrate_pdf([](double x) { return x; });
  CHECK(std::abs(mass - 1.0) <= 1e-8);
  CHECK(std::abs(mean - 0.521405) <= 1e-5);
}

TEST_CASE("case 3 without shadowing equals the distance-only integral") {
  RadioParams rp;
  rp.shadow_sigma_db = 1e-9;
  const double side = 80.0;
  const double th = co::theta(rp);
  const double oracle =
      co::integrate_pdf([&](double x) { return std::exp(-th / co::gain(side * x, rp)); });
  CHECK(std::abs(link_prob_case3(side, rp) - oracle) <= 1e-6);
  CHECK(std::abs(link_prob_distance_only(side, RadioParams{}) - oracle) <= 1e-6);
}

TEST_CASE("case 3 tends to one at huge power") {
  RadioParams rp;
  rp.d2d_tx_power_dbm = 250.0;
  CHECK(link_prob_case3(80.0, rp) >= 1.0 - 1e-4);
}

TEST_CASE("case 3 matches Monte Carlo at 80 m and 20 dBm") {
  RadioParams rp;
  rp.d2d_tx_power_dbm = 20.0;
  const double q = link_prob_case3(80.0, rp);
  const auto mc = co::case3_monte_carlo(80.0, rp, 1'000'000, 2024);
  CHECK(std::abs(q - mc.mean) <= 3 * mc.se);
}

TEST_CASE("case 3 is monotone in power and side") {
  double prev_side = 2.0;
  for (double side : {20.0, 40.0, 60.0, 80.0, 100.0}) {
    double prev_power = -1.0;
    for (double p : {0.0, 5.0, 10.0, 15.0, 20.0, 25.0}) {
      RadioParams rp;
      rp.d2d_tx_power_dbm = p;
      const double q = link_prob_case3(side, rp);
      CHECK(q >= 0.0);
      CHECK(q <= 1.0);
      CHECK(q >= prev_power - 1e-6);
      prev_power = q;
      if (p == 20.0) {
        CHECK(q <= prev_side + 1e-6);
        prev_side = q;
      }
    }
  }
}

TEST_CASE("power control law") {
  RadioParams rp;
  for (double d = 10.0; d <= 90.0; d += 10.0) CHECK(power_control_dbm(d, rp, 16.0) <= 20.0);
  CHECK(dbm_to_mw(power_control_dbm(90.0, rp, 1.0)) == 0.0);
  const double ratio =
      dbm_to_mw(power_control_dbm(60.0, rp, 16.0)) / dbm_to_mw(power_control_dbm(30.0, rp, 16.0));
  CHECK(ratio == doctest::Approx(std::pow(2.0, rp.pathloss_exponent_alpha)).epsilon(1e-12));
  CHECK_THROWS_AS(power_control_dbm(0.0, rp, 16.0), ParameterError);
  CHECK_THROWS_AS(power_control_dbm(10.0, rp, 0.5), ParameterError);
}

TEST_CASE("layouts stay inside the square") {
  Rng rng(3);
  const auto layout = draw_layout(500, 37.0, rng);
  for (const auto& p : layout.positions) {
    CHECK(p.x >= 0.0);
    CHECK(p.x <= 37.0);
    CHECK(p.y >= 0.0);
    CHECK(p.y <= 37.0);
  }
  CHECK_NOTHROW(layout.validate());
}
