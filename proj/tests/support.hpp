// Shared fixtures for the test programs: random small instances and an
// independent evaluation of the network utility by serving mode.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "d2dcache/channel.hpp"
#include "d2dcache/objectives.hpp"
#include "d2dcache/optimizer.hpp"
#include "d2dcache/preference.hpp"
#include "d2dcache/random.hpp"

namespace testing_support {

using namespace d2dcache;

inline std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

/// Rows drawn from a Dirichlet(1,...,1)-like recipe: normalized exponentials.
inline PreferenceMatrix random_preferences(Rng& rng, std::size_t users, std::size_t files) {
  std::exponential_distribution<double> ex(1.0);
  Matrix m(users, files);
  for (std::size_t k = 0; k < users; ++k) {
    double sum = 0.0;
    for (std::size_t f = 0; f < files; ++f) sum += (m(k, f) = ex(rng));
    for (std::size_t f = 0; f < files; ++f) m(k, f) /= sum;
  }
  return PreferenceMatrix(std::move(m));
}

/// Symmetric, unit diagonal, off-diagonal uniform in [0,1].
inline LinkProbabilityMatrix random_links(Rng& rng, std::size_t users) {
  Matrix l(users, users, 1.0);
  for (std::size_t k = 0; k < users; ++k)
    for (std::size_t j = k + 1; j < users; ++j) l(k, j) = l(j, k) = uniform01(rng);
  return LinkProbabilityMatrix(std::move(l));
}

/// Nonempty random subset of [0, users), ascending.
inline std::vector<std::size_t> random_active_set(Rng& rng, std::size_t users) {
  std::vector<std::size_t> idx(users);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(draw_between(rng, 1, users));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (double& x : w) x = 0.5 + uniform01(rng);
  return w;
}

/// Feasible fractional policy: every row sums to at most S.
inline CachingPolicy random_policy(Rng& rng, std::size_t users, std::size_t files,
                                   std::size_t cache) {
  Matrix b(users, files);
  for (std::size_t k = 0; k < users; ++k) {
    double sum = 0.0;
    for (std::size_t f = 0; f < files; ++f) sum += (b(k, f) = uniform01(rng));
    const double scale = std::min(1.0, static_cast<double>(cache) / sum) * uniform01(rng);
    for (std::size_t f = 0; f < files; ++f) b(k, f) *= scale;
  }
  return CachingPolicy(std::move(b), cache);
}

/// 0/1 policy caching exactly S random files in every row.
inline CachingPolicy random_integral_policy(Rng& rng, std::size_t users, std::size_t files,
                                            std::size_t cache) {
  Matrix b(users, files);
  std::vector<std::size_t> idx(files);
  for (std::size_t k = 0; k < users; ++k) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < cache; ++i) b(k, idx[i]) = 1.0;
  }
  return CachingPolicy(std::move(b), cache);
}

inline MetricConstants reference_constants() { return default_metric_constants(RadioParams{}); }

/// Expected utility from the serving process itself: the BS-selected user is
/// served by its own cache, else by some D2D holder, else by the BS, and every
/// other active user earns U_S on a self hit.
inline double utility_by_serving_mode(const ClusterInstance& inst, const CachingPolicy& b,
                                      const UtilityTriple& u) {
  const double ka = static_cast<double>(inst.active_count());
  double total = 0.0;
  for (std::size_t k : inst.active_users()) {
    const double w = inst.weight(k);
    for (std::size_t m = 0; m < inst.files(); ++m) {
      const double a = inst.preferences()(k, m);
      if (a == 0.0) continue;
      double none_reachable = 1.0;
      for (std::size_t l = 0; l < inst.users(); ++l)
        if (l != k) none_reachable *= 1.0 - b(l, m) * inst.links()(k, l);
      const double p_self = b(k, m);
      const double p_d2d = (1.0 - p_self) * (1.0 - none_reachable);
      const double p_bs = (1.0 - p_self) * none_reachable;
      total += w / ka * a * (p_self * u.u_s + p_d2d * u.u_d + p_bs * u.u_b);
      total += w * (ka - 1.0) / ka * a * p_self * u.u_s;
    }
  }
  return total;
}

/// Every subset of size `count` from [0, n), in lexicographic order.
inline std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t count) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  auto rec = [&](auto&& self, std::size_t start) -> void {
    if (cur.size() == count) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

inline std::vector<double> indicator_row(std::size_t files, const std::vector<std::size_t>& set) {
  std::vector<double> row(files, 0.0);
  for (std::size_t f : set) row[f] = 1.0;
  return row;
}

}  // namespace testing_support
