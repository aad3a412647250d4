#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "d2dcache/baselines.hpp"
#include "d2dcache/error.hpp"
#include "d2dcache/simulator.hpp"
#include "support.hpp"

using namespace d2dcache;
using namespace testing_support;

namespace {

ClusterInstance random_instance(Rng& rng, std::size_t users, std::size_t files, std::size_t cache,
                                const UtilityTriple& u) {
  auto active = random_active_set(rng, users);
  auto weights = random_weights(rng, active.size());
  return ClusterInstance(random_preferences(rng, users, files), std::move(active),
                         std::move(weights), cache, random_links(rng, users), u);
}

double best_single_deviation(const ClusterInstance& inst, const CachingPolicy& policy) {
  double best = -std::numeric_limits<double>::infinity();
  const auto sets = subsets(inst.files(), inst.cache_size());
  for (std::size_t k = 0; k < inst.users(); ++k) {
    CachingPolicy trial = policy;
    for (const auto& s : sets) {
      trial.set_row(k, indicator_row(inst.files(), s));
      best = std::max(best, expected_utility(inst, trial));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("access probabilities for one user caching its top files") {
  Matrix a(1, 4);
  a(0, 0) = 0.1;
  a(0, 1) = 0.4;
  a(0, 2) = 0.2;
  a(0, 3) = 0.3;
  const MetricConstants mc = reference_constants();
  ClusterInstance inst(PreferenceMatrix(a), {0}, {}, 2, link_prob_case1(1), throughput_objective(mc));
  const CachingPolicy b = selfish_policy(inst);
  const std::uint8_t up[] = {1};
  const auto p = access_probabilities(inst, b, 0, up);
  CHECK(p.self == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(p.d2d == 0.0);
  CHECK(p.bs == doctest::Approx(0.3).epsilon(1e-15));
  // Closed form with a single active user and perfect links.
  CHECK(expected_utility(inst, b) ==
        doctest::Approx(mc.t_b * 0.3 + mc.t_s * 0.7).epsilon(1e-14));
}

TEST_CASE("access probabilities with nothing cached") {
  Rng rng(5);
  ClusterInstance inst(random_preferences(rng, 3, 5), {0, 1, 2}, {}, 1, random_links(rng, 3),
                       hitrate_objective(3));
  const std::uint8_t up[] = {1, 0, 0};
  const auto p = access_probabilities(inst, CachingPolicy::zeros(3, 5), 0, up);
  CHECK(p.bs == 1.0);
  CHECK(p.self == 0.0);
  CHECK(p.d2d == 0.0);
}

TEST_CASE("access probabilities sum to one exactly") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k_users = draw_between(rng, 1, 6);
    const std::size_t files = draw_between(rng, 2, 8);
    const std::size_t cache = draw_between(rng, 1, files - 1);
    const auto inst =
        random_instance(rng, k_users, files, cache, throughput_objective(reference_constants()));
    const auto b = random_policy(rng, k_users, files, cache);
    std::vector<std::uint8_t> up(k_users);
    for (auto& x : up) x = uniform01(rng) < 0.5;
    const std::size_t k = inst.active_users()[uniform_index(rng, inst.active_count())];
    up[k] = 1;
    const auto p = access_probabilities(inst, b, k, up);
    REQUIRE(p.bs + p.self + p.d2d == 1.0);
    for (double x : {p.bs, p.self, p.d2d}) {
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
    }
  }
}

TEST_CASE("access probabilities reject inactive users") {
  Rng rng(2);
  ClusterInstance inst(random_preferences(rng, 3, 4), {0}, {}, 1, random_links(rng, 3),
                       hitrate_objective(1));
  const std::uint8_t up[] = {1, 1, 1};
  CHECK_THROWS_AS(access_probabilities(inst, CachingPolicy::zeros(3, 4), 2, up), ParameterError);
}

TEST_CASE("empty policy earns the BS utility") {
  Rng rng(8);
  const auto mc = reference_constants();
  ClusterInstance inst(random_preferences(rng, 5, 7), {0, 1, 3}, {}, 2, random_links(rng, 5),
                       throughput_objective(mc));
  CHECK(expected_utility(inst, CachingPolicy::zeros(5, 7)) == doctest::Approx(mc.t_b).epsilon(1e-14));
  const NetworkMetrics m = evaluate_metrics(inst, CachingPolicy::zeros(5, 7), mc);
  CHECK(m.hit_rate == 0.0);
  CHECK(m.throughput == doctest::Approx(mc.t_b).epsilon(1e-14));
}

TEST_CASE("closed form equals the serving-mode expectation") {
  Rng rng(23);
  const auto mc = reference_constants();
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k_users = draw_between(rng, 1, 6);
    const std::size_t files = draw_between(rng, 2, 9);
    const std::size_t cache = draw_between(rng, 1, files - 1);
    const auto inst = random_instance(rng, k_users, files, cache, throughput_objective(mc));
    const auto b = random_policy(rng, k_users, files, cache);
    for (const UtilityTriple& u :
         {throughput_objective(mc), cost_objective(mc), hitrate_objective(inst.active_count())}) {
      const double closed = expected_utility(inst, b, u);
      const double oracle = utility_by_serving_mode(inst, b, u);
      REQUIRE(std::abs(closed - oracle) <= 1e-12 * std::max(1.0, std::abs(oracle)));
    }
  }
}

TEST_CASE("closed form matches the scheduler simulation") {
  Rng rng(31);
  const auto mc = reference_constants();
  Matrix l(3, 3, 1.0);
  l(0, 1) = l(1, 0) = 0.7;
  l(0, 2) = l(2, 0) = 0.3;
  l(1, 2) = l(2, 1) = 0.5;
  ClusterInstance inst(random_preferences(rng, 3, 5), {0, 1, 2}, {}, 1,
                       LinkProbabilityMatrix(l), throughput_objective(mc));
  const auto b = random_policy(rng, 3, 5, 1);
  InstanceSimulationOptions opt;
  opt.realizations = 1'000'000;
  opt.seed = 4;
  const auto sim = simulate_instance(inst, b, mc, opt).random_push;
  const NetworkMetrics m = evaluate_metrics(inst, b, mc);
  CHECK(std::abs(sim.throughput.mean - m.throughput) <= 3 * sim.throughput.se);
  CHECK(std::abs(sim.energy.mean - m.cost) <= 3 * sim.energy.se);
  CHECK(std::abs(sim.hit_rate.mean - m.hit_rate) <= 3 * sim.hit_rate.se);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(41);
  const auto mc = reference_constants();
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(rng, 3, 5, 2, throughput_objective(mc));
    const auto b = random_policy(rng, 3, 5, 2);
    const Matrix g = utility_gradient(inst, b);
    const double h = 1e-6;
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t m = 0; m < 5; ++m) {
        if (b(j, m) < h || b(j, m) > 1 - h) continue;
        std::vector<double> row(b.row(j).begin(), b.row(j).end());
        CachingPolicy up = b, down = b;
        row[m] = b(j, m) + h;
        up.set_row(j, row);
        row[m] = b(j, m) - h;
        down.set_row(j, row);
        const double fd = (expected_utility(inst, up) - expected_utility(inst, down)) / (2 * h);
        CHECK(std::abs(fd - g(j, m)) <= 1e-5 * std::max(std::abs(g(j, m)), 1e-3 * mc.t_d));
        CHECK(g(j, m) >= -1e-12);
      }
    }
  }
}

TEST_CASE("gradient of an inactive user vanishes when U_B equals U_D") {
  Rng rng(43);
  ClusterInstance inst(random_preferences(rng, 3, 4), {0, 1}, {}, 1, random_links(rng, 3),
                       UtilityTriple{2.0, 2.0, 2.0});
  const Matrix g = utility_gradient(inst, random_policy(rng, 3, 4, 1));
  for (std::size_t m = 0; m < 4; ++m) CHECK(g(2, m) == 0.0);
}

TEST_CASE("best response of a lone user is its top files") {
  Rng rng(47);
  const auto mc = reference_constants();
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t files = draw_between(rng, 3, 7);
    const std::size_t cache = draw_between(rng, 1, 2);
    ClusterInstance inst(random_preferences(rng, 1, files), {0}, {}, cache, link_prob_case1(1),
                         throughput_objective(mc));
    const auto row = best_response(inst, CachingPolicy::zeros(1, files), 0);
    double best = -1.0;
    std::vector<double> best_row;
    for (const auto& s : subsets(files, cache)) {
      CachingPolicy p = CachingPolicy::zeros(1, files);
      p.set_row(0, indicator_row(files, s));
      const double u = expected_utility(inst, p);
      if (u > best) {
        best = u;
        best_row = indicator_row(files, s);
      }
    }
    CHECK(row == best_row);
  }
}

TEST_CASE("best response of an inactive user serves the others") {
  Rng rng(53);
  const auto mc = reference_constants();
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t files = 6;
    ClusterInstance inst(random_preferences(rng, 4, files), {0, 1, 2}, {}, 2,
                         random_links(rng, 4), throughput_objective(mc));
    const auto row = best_response(inst, CachingPolicy::zeros(4, files), 3);
    std::vector<double> demand(files, 0.0);
    for (std::size_t k : inst.active_users())
      for (std::size_t m = 0; m < files; ++m)
        demand[m] += inst.preferences()(k, m) * inst.links()(k, 3);
    std::vector<std::size_t> order(files);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return demand[x] > demand[y]; });
    order.resize(2);
    std::sort(order.begin(), order.end());
    CHECK(row == indicator_row(files, order));

    double best = -1.0;
    for (const auto& s : subsets(files, 2)) {
      CachingPolicy p = CachingPolicy::zeros(4, files);
      p.set_row(3, indicator_row(files, s));
      best = std::max(best, expected_utility(inst, p));
    }
    CachingPolicy chosen = CachingPolicy::zeros(4, files);
    chosen.set_row(3, row);
    CHECK(expected_utility(inst, chosen) == doctest::Approx(best).epsilon(1e-14));
  }
}

TEST_CASE("top file ties go to the lower index") {
  const std::vector<double> v{0.2, 0.5, 0.5, 0.1, 0.5};
  CHECK(top_indices(v, 1) == std::vector<std::size_t>{1});
  CHECK(top_indices(v, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_indices(v, 4) == std::vector<std::size_t>{0, 1, 2, 4});

  Matrix a(1, 3);
  a(0, 0) = 0.25;
  a(0, 1) = 0.5;
  a(0, 2) = 0.25;
  ClusterInstance inst(PreferenceMatrix(a), {0}, {}, 2, link_prob_case1(1), hitrate_objective(1));
  CHECK(best_response(inst, CachingPolicy::zeros(1, 3), 0) == std::vector<double>{1, 1, 0});
}

TEST_CASE("orthogonal preferences split the cache") {
  Matrix a(2, 4);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  ClusterInstance inst(PreferenceMatrix(a), {0, 1}, {}, 1, link_prob_case1(2), hitrate_objective(2));
  const auto report = optimize(inst, CachingPolicy::zeros(2, 4));
  REQUIRE(report.converged);
  CHECK(report.policy(0, 0) == 1.0);
  CHECK(report.policy(1, 1) == 1.0);
  CHECK(evaluate_metrics(inst, report.policy, reference_constants()).hit_rate == 1.0);

  double best = 0.0;
  for (std::size_t f0 = 0; f0 < 4; ++f0)
    for (std::size_t f1 = 0; f1 < 4; ++f1) {
      CachingPolicy p = CachingPolicy::zeros(2, 4);
      p.set_row(0, indicator_row(4, {f0}));
      p.set_row(1, indicator_row(4, {f1}));
      best = std::max(best, expected_utility(inst, p));
    }
  CHECK(expected_utility(inst, report.policy) == best);
}

TEST_CASE("a stationary start converges in one round") {
  Rng rng(59);
  const auto inst = random_instance(rng, 4, 8, 2, throughput_objective(reference_constants()));
  const auto first = optimize(inst, CachingPolicy::zeros(4, 8));
  REQUIRE(first.converged);
  const auto second = optimize(inst, first.policy);
  CHECK(second.converged);
  CHECK(second.rounds == 1);
  CHECK(second.policy == first.policy);
  for (double u : second.utility_trace) CHECK(u == second.utility_trace.front());
}

TEST_CASE("optimizer reaches a coordinate-wise maximum") {
  Rng rng(61);
  const auto mc = reference_constants();
  for (int seed = 0; seed < 100; ++seed) {
    const auto inst = random_instance(rng, 3, 6, 2, throughput_objective(mc));
    const auto report = optimize(inst, CachingPolicy::zeros(3, 6));
    REQUIRE(report.converged);
    const double u = expected_utility(inst, report.policy);
    CHECK(u >= best_single_deviation(inst, report.policy) - 1e-9 * std::abs(u));
    CHECK(is_best_response_fixed_point(inst, report.policy));
    CHECK(report.stationarity_residual == 0.0);
    for (std::size_t i = 1; i < report.utility_trace.size(); ++i)
      CHECK(report.utility_trace[i] >=
            report.utility_trace[i - 1] - 1e-12 * std::abs(report.utility_trace[i - 1]));
    CHECK(report.policy.is_integral());
    for (std::size_t k = 0; k < 3; ++k) CHECK(report.policy.row_sum(k) == 2.0);
  }
}

TEST_CASE("optimizer input checks") {
  Rng rng(67);
  const auto inst = random_instance(rng, 3, 5, 1, throughput_objective(reference_constants()));
  CHECK_THROWS_AS(optimize(inst, CachingPolicy::zeros(2, 5)), ParameterError);
  Matrix heavy(3, 5, 1.0);
  CHECK_THROWS_AS(CachingPolicy(heavy, 1), ParameterError);
  OptimizeOptions bad_order;
  bad_order.order = {0, 7};
  CHECK_THROWS_AS(optimize(inst, CachingPolicy::zeros(3, 5), bad_order), ParameterError);
  CHECK_THROWS_AS(ClusterInstance(random_preferences(rng, 3, 5), {0, 0}, {}, 1,
                                  random_links(rng, 3), hitrate_objective(2)),
                  ParameterError);
  CHECK_THROWS_AS(ClusterInstance(random_preferences(rng, 3, 5), {0}, {}, 5,
                                  random_links(rng, 3), hitrate_objective(1)),
                  ParameterError);
  CHECK_THROWS_AS(ClusterInstance(random_preferences(rng, 3, 5), {0}, {-1.0}, 1,
                                  random_links(rng, 3), hitrate_objective(1)),
                  ParameterError);
}

TEST_CASE("selfish start is supported and also monotone") {
  Rng rng(71);
  const auto inst = random_instance(rng, 6, 30, 3, throughput_objective(reference_constants()));
  const auto report = optimize(inst, initial_policy(inst, InitKind::selfish));
  CHECK(report.converged);
  CHECK(report.utility_trace.front() == doctest::Approx(expected_utility(inst, selfish_policy(inst))));
  CHECK(report.utility_trace.back() >= report.utility_trace.front());
}

TEST_CASE("metrics identities") {
  Rng rng(73);
  const auto mc = reference_constants();
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, 4, 6, 2, throughput_objective(mc));
    const auto b = random_policy(rng, 4, 6, 2);
    const NetworkMetrics m = evaluate_metrics(inst, b, mc);
    CHECK(m.hit_rate >= 0.0);
    CHECK(m.hit_rate <= 1.0);
    CHECK(m.ee == m.throughput / m.cost);
  }
  MetricConstants free = mc;
  free.c_b = free.c_d = free.c_s = 0.0;
  const auto inst = random_instance(rng, 3, 4, 1, throughput_objective(free));
  CHECK(evaluate_metrics(inst, CachingPolicy::zeros(3, 4), free).ee ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("EE with unit costs") {
  Rng rng(79);
  MetricConstants mc = reference_constants();
  mc.c_b = mc.c_d = mc.c_s = 1.0;
  // One active user: C_net is 1, so EE is the throughput.
  ClusterInstance lone(random_preferences(rng, 5, 12), {2}, {}, 2, random_links(rng, 5),
                       throughput_objective(mc));
  const auto ee = optimize_ee(lone, mc);
  const auto tp = optimize(lone, CachingPolicy::zeros(5, 12));
  const NetworkMetrics m = evaluate_metrics(lone, ee.report.policy, mc);
  CHECK(m.cost == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.throughput == doctest::Approx(expected_utility(lone, tp.policy)).epsilon(1e-12));
  CHECK(ee.t_star == doctest::Approx(m.throughput).epsilon(1e-12));
  // Several active users: self hits of unselected users also cost one unit.
  const auto inst = random_instance(rng, 5, 12, 2, throughput_objective(mc));
  const auto many = optimize_ee(inst, mc);
  const NetworkMetrics mm = evaluate_metrics(inst, many.report.policy, mc);
  CHECK(mm.cost >= 1.0);
  CHECK(std::abs(mm.throughput - many.t_star * mm.cost) <= 1e-6 * mm.cost);
}

TEST_CASE("EE is unbounded when every request is self-served") {
  Matrix a(2, 4);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  const auto mc = reference_constants();
  ClusterInstance inst(PreferenceMatrix(a), {0, 1}, {}, 1, link_prob_case1(2),
                       throughput_objective(mc));
  const auto ee = optimize_ee(inst, mc);
  CHECK(std::isinf(ee.t_star));
  CHECK(ee.report.policy(0, 0) == 1.0);
  CHECK(ee.report.policy(1, 1) == 1.0);
  CHECK(evaluate_metrics(inst, ee.report.policy, mc).cost == 0.0);
}

TEST_CASE("Dinkelbach fixed point and exhaustive comparison") {
  Rng rng(83);
  const auto mc = reference_constants();
  int global = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    const auto inst = random_instance(rng, 2, 4, 1, throughput_objective(mc));
    const auto r = optimize_ee(inst, mc);
    const NetworkMetrics m = evaluate_metrics(inst, r.report.policy, mc);
    CHECK(std::abs(m.throughput - r.t_star * m.cost) <= 1e-6 * m.cost);
    CHECK(r.report.policy.is_integral());
    for (std::size_t i = 1; i < r.t_trace.size(); ++i) CHECK(r.t_trace[i] >= r.t_trace[i - 1]);
    double best = 0.0;
    for (std::size_t f0 = 0; f0 < 4; ++f0)
      for (std::size_t f1 = 0; f1 < 4; ++f1) {
        CachingPolicy p = CachingPolicy::zeros(2, 4);
        p.set_row(0, indicator_row(4, {f0}));
        p.set_row(1, indicator_row(4, {f1}));
        best = std::max(best, evaluate_metrics(inst, p, mc).ee);
      }
    if (m.ee >= best * (1 - 1e-9)) ++global;
  }
  MESSAGE("EE global optimality on K=2, M=4, S=1: " << global << "/" << trials);
  CHECK(global > 0);
}

TEST_CASE("per-round cost grows less than three-fold when M doubles") {
  Rng rng(89);
  const auto mc = reference_constants();
  auto per_round = [&](std::size_t files) {
    ClusterInstance inst(random_preferences(rng, 10, files), {0, 1, 2, 3, 4, 5, 6, 7}, {}, 10,
                         link_prob_case1(10), throughput_objective(mc));
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 3; ++rep) {
      OptimizeOptions opt;
      opt.max_rounds = 3;
      const auto t0 = std::chrono::steady_clock::now();
      const auto report = optimize(inst, CachingPolicy::zeros(10, files), opt);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      best = std::min(best, dt.count() / static_cast<double>(report.iterations));
    }
    return best;
  };
  const double small = per_round(4000);
  const double large = per_round(8000);
  MESSAGE("per-update seconds: M=4000 " << small << ", M=8000 " << large);
  CHECK(large < 3.0 * small);
}

TEST_CASE("policy csv and report json") {
  Rng rng(97);
  const auto inst = random_instance(rng, 3, 6, 2, throughput_objective(reference_constants()));
  const auto report = optimize(inst, CachingPolicy::zeros(3, 6));
  std::stringstream ss;
  write_policy_csv(ss, report.policy);
  CHECK(read_policy_csv(ss, 2) == report.policy);
  std::ostringstream js;
  report.write_json(js);
  CHECK(js.str().find("\"utility_trace\"") != std::string::npos);
  CHECK(js.str().find("\"converged\"") != std::string::npos);
}
