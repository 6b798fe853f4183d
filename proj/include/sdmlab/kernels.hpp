#pragma once

#include <cstdint>

#include "sdmlab/exact.hpp"

// Data-parallel sweep kernels. Every kernel comes in a serial reference
// variant and an OpenMP variant; both produce byte-identical output because
// each ordinal derives its own seed stream and reductions run in ordinal
// order. The *_sweep entry points dispatch on the thread count.

namespace sdmlab::kernels {

/// How many worker threads a request resolves to (0 = OpenMP default,
/// otherwise the explicit cap).
int resolve_threads(int requested);

/**
 * Exact set-quality sweep over the policy indices [begin, end).
 * For policy index i, writes the quality product of MDPs [0, split) to
 * out_a[i - begin] and, when out_b is non-null, the product of MDPs
 * [split, all) to out_b[i - begin].
 */
void exact_quality_sweep_serial(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                                int split, double* out_a, double* out_b,
                                const ExactOptions& opts);
void exact_quality_sweep_parallel(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                  const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                                  int split, double* out_a, double* out_b,
                                  const ExactOptions& opts, int threads);
void exact_quality_sweep(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                         const PolicyIndexer& indexer, uint64_t begin, uint64_t end, int split,
                         double* out_a, double* out_b, const ExactOptions& opts, int threads);

/// Streaming extremes of an exact sweep (no per-policy storage).
/// argmax ties resolve to the lowest policy index.
struct SweepExtremes {
    double max_quality = 0.0;
    uint64_t argmax_index = 0;
    uint64_t positive_count = 0; // policies with quality > 0
    uint64_t proper_count = 0;   // policies proper on every MDP of the set
};

SweepExtremes exact_extremes_sweep_serial(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                          const PolicyIndexer& indexer, uint64_t begin,
                                          uint64_t end, const ExactOptions& opts);
SweepExtremes exact_extremes_sweep_parallel(const std::vector<CsspMdp>& mdps,
                                            const KeySpace& space, const PolicyIndexer& indexer,
                                            uint64_t begin, uint64_t end, const ExactOptions& opts,
                                            int threads);
SweepExtremes exact_extremes_sweep(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                   const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                                   const ExactOptions& opts, int threads);

/// Per-policy Monte Carlo scoring options shared by the estimator kernels.
struct RolloutOptions {
    int max_steps = 256;
    double quality_cap = kDefaultQualityCap;
    double constraint_tol = 1e-9;
    // truncated_cost scores a goal-missing trajectory by its accumulated
    // cost instead of zeroing the policy (used with shaped costs).
    bool truncated_cost = false;
    // reuse one rollout stream per (policy ordinal, group position) so
    // paired train/test evaluations share trajectories
    bool paired_streams = true;
};

/// Strict-or-smoothed quality of one rollout batch (shared scoring rule for
/// all Monte Carlo paths). Totals arrays are as produced by rollout_batch.
QualityEstimate batch_quality(const CsspMdp& mdp, int n, const double* total_costs,
                              const double* constraint_totals, const uint8_t* reached,
                              const RolloutOptions& opts);

/// Where the difficulty sweep draws its policies from. Exactly one source:
/// uniform over the key space, a factorized prior, or a precompiled explicit
/// support (slot assignments plus masses).
struct PolicySource {
    const FactorizedDistribution* factorized = nullptr;
    const std::vector<std::vector<int>>* explicit_slots = nullptr;
    const std::vector<double>* explicit_probs = nullptr;
};

/**
 * Monte Carlo difficulty sweep: samples `count` policies from `source`
 * (uniform when empty), rolls each out `rollouts` times on every MDP,
 * rescales each per-MDP quality by scale[m], and writes the per-policy
 * quality products of MDP groups [0, split) and [split, all) to out_a/out_b.
 * Policy ordinal i draws from streams derived as (seed, "policy", i) and
 * (seed, "rollout", i, pair-position), so results do not depend on the
 * thread count and paired groups share trajectories position for position.
 */
void mc_quality_sweep_serial(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                             const PolicySource& source, uint64_t count, int rollouts, int split,
                             const std::vector<double>& scale, uint64_t seed,
                             const RolloutOptions& opts, double* out_a, double* out_b);
void mc_quality_sweep_parallel(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                               const PolicySource& source, uint64_t count, int rollouts, int split,
                               const std::vector<double>& scale, uint64_t seed,
                               const RolloutOptions& opts, double* out_a, double* out_b,
                               int threads);
void mc_quality_sweep(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                      const PolicySource& source, uint64_t count, int rollouts, int split,
                      const std::vector<double>& scale, uint64_t seed, const RolloutOptions& opts,
                      double* out_a, double* out_b, int threads);

/**
 * Single-policy rollout batch on MDP m of a set. Trajectory t draws from
 * base.child("traj", t); callers encode policy ordinal and pairing position
 * into `base`. Outputs are arrays of length n (constraint totals n*K,
 * trajectory-major).
 */
void rollout_batch(const CsspMdp& mdp, const KeySpace& space, int m, const std::vector<int>& slots,
                   int n, const SeedStream& base, int max_steps, double* total_costs,
                   double* constraint_totals, uint8_t* reached, int* steps);

} // namespace sdmlab::kernels
