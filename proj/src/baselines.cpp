#include "d2dcache/baselines.hpp"

namespace d2dcache {

CachingPolicy selfish_policy(const ClusterInstance& inst) {
  return initial_policy(inst, InitKind::selfish);
}

CachingPolicy global_popularity_policy(const ClusterInstance& inst, const GlobalPopularity& pop,
                                       const OptimizeOptions& options, InitKind init) {
  return homogeneous_design(inst, pop, options, init).policy;
}

HomogeneousOutcome homogeneous_design(const ClusterInstance& inst, const GlobalPopularity& pop,
                                      const OptimizeOptions& options, InitKind init) {
  ClusterInstance homogeneous = inst.with_preferences(homogenize(pop, inst.users()));
  CachingPolicy policy = optimize(homogeneous, initial_policy(homogeneous, init), options).policy;
  return {std::move(homogeneous), std::move(policy)};
}

}  // namespace d2dcache
