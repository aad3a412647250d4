#pragma once

#include "d2dcache/optimizer.hpp"
#include "d2dcache/preference.hpp"

namespace d2dcache {

/// Every active user caches its own S most wanted files; inactive users,
/// having no requests of their own, cache nothing.
CachingPolicy selfish_policy(const ClusterInstance& inst);

/// Design run with every user's preferences replaced by the global
/// popularity; the returned policy is meant to be evaluated under the true
/// preferences.
CachingPolicy global_popularity_policy(const ClusterInstance& inst, const GlobalPopularity& pop,
                                       const OptimizeOptions& options = {},
                                       InitKind init = InitKind::zeros);

/// Homogeneous-model reference: design and evaluation both assume that every
/// user requests according to the global popularity.
struct HomogeneousOutcome {
  ClusterInstance instance;  // homogeneous preferences
  CachingPolicy policy;
};

HomogeneousOutcome homogeneous_design(const ClusterInstance& inst, const GlobalPopularity& pop,
                                      const OptimizeOptions& options = {},
                                      InitKind init = InitKind::zeros);

}  // namespace d2dcache
