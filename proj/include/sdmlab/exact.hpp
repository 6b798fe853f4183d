#pragma once

#include "sdmlab/policy.hpp"

namespace sdmlab {

/// Quality assigned when a proper policy has zero expected cost (possible
/// when the initial state is the goal). Keeps normalization finite.
constexpr double kDefaultQualityCap = 1e12;

struct ExactOptions {
    double quality_cap = kDefaultQualityCap;
    double properness_tol = 1e-9;  // absorption >= 1 - tol counts as proper
    double constraint_tol = 1e-9;  // E[sum d] <= v + tol counts as satisfied
    uint64_t enumeration_cap = kEnumerationCap;
    double vi_tol = 1e-9;
    int vi_max_iters = 100'000;
    int threads = 0; // 0 = all available; sweeps are thread-count invariant
};

/// Evaluation result for one policy on one MDP (or, via products, a set).
/// Improper or constraint-violating policies have quality 0; the expected
/// costs of an improper policy are reported as +infinity.
struct QualityEstimate {
    bool proper = false;
    double expected_total_cost = 0.0;
    std::vector<double> expected_constraint_costs;
    bool constraints_satisfied = false;
    double quality = 0.0;
};

/// Difficulty decomposition shared by the exact and Monte Carlo routes.
/// For the exact route both terms are total-variation distances in [0,1];
/// for the Monte Carlo route train_term is (mean quality)^-1 in [1, inf)
/// and +infinity (degenerate=true) when no sampled policy scored above 0.
struct DifficultyReport {
    double train_term = 0.0;
    double distance_term = 0.0;
    double total = 0.0;
    bool degenerate = false;
    std::string method;           // "exact" or "monte_carlo"
    uint64_t sample_count = 0;    // policies examined (enumerated or sampled)
    uint64_t rollouts_per_policy = 0;
    uint64_t seed = 0;
};

/**
 * Absorbing-chain evaluation of one deterministic policy on one MDP.
 *
 * Builds the policy-induced Markov chain over policy-reachable states,
 * certifies properness via the absorption-probability linear system, then
 * solves one pivoted system with K+1 right-hand sides for the expected total
 * cost and constraint costs. States whose absorption probability falls below
 * the properness threshold are excluded from the cost system (they carry at
 * most tolerance-level probability mass under a proper policy).
 * The policy must cover every state the walk can touch.
 */
QualityEstimate exact_policy_evaluation(const CsspMdp& mdp, const DeterministicPolicy& policy,
                                        const ExactOptions& opts = {});

/// Set quality: product of per-MDP exact qualities.
double quality_on_set(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                      const ExactOptions& opts = {});

/**
 * Slot-level evaluator for enumeration-scale sweeps.
 *
 * Keeps references to the MDP list and key space, which must outlive it.
 * Scratch buffers are thread-local, so a single instance may be shared
 * across threads. Deterministic MDPs take a trajectory-following fast path
 * (cycle detection instead of a linear solve); stochastic ones go through
 * the same absorbing-chain solve as exact_policy_evaluation.
 */
class SetEvaluator {
  public:
    SetEvaluator(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                 const ExactOptions& opts = {});

    /// Evaluate MDP m of the set under a slot assignment.
    QualityEstimate evaluate_mdp(int m, const std::vector<int>& slots);

    /// Product of qualities over MDPs [first, last).
    double group_quality(int first, int last, const std::vector<int>& slots);

    /// Product over the whole set.
    double set_quality(const std::vector<int>& slots);

  private:
    const std::vector<CsspMdp>& mdps_;
    const KeySpace& space_;
    ExactOptions opts_;
    std::vector<char> is_deterministic_;
};

/**
 * Exact solution distribution P*(Pi) over the enumerated policy space of the
 * MDP set: mass proportional to set quality. Errors when the space exceeds
 * opts.enumeration_cap or no policy has positive quality.
 */
ExplicitDistribution solution_distribution(const std::vector<CsspMdp>& mdps,
                                           const ContextSpec& spec, const ExactOptions& opts = {});

/// Total variation distance. The two distributions must share one support
/// (same policies in the same order).
double total_variation(const ExplicitDistribution& p, const ExplicitDistribution& q);

/// Shannon entropy in nats; 0 log 0 = 0.
double shannon_entropy(const ExplicitDistribution& p);

/// Power-temper: p_i^beta renormalized. beta > 1 sharpens, beta < 1 flattens,
/// beta = 0 is uniform over the support. Requires beta >= 0.
ExplicitDistribution temper_distribution(const ExplicitDistribution& p, double beta);

/**
 * Exact task difficulty: TV(U, P*_train) + TV(P*_train, P*_test) over the
 * shared policy space of train and test combined. Distributions are
 * normalized, so per-MDP quality rescaling cancels and is not applied.
 */
DifficultyReport exact_task_difficulty(const std::vector<CsspMdp>& train,
                                       const std::vector<CsspMdp>& test, const ContextSpec& spec,
                                       const ExactOptions& opts = {});

/// TV(P*_a, P*_b) over the combined policy space of the two sets.
double exact_set_distance(const std::vector<CsspMdp>& a, const std::vector<CsspMdp>& b,
                          const ContextSpec& spec, const ExactOptions& opts = {});

/**
 * Maximum obtainable quality q* of a single MDP.
 *
 * When the policy space fits the enumeration cap, the maximum is found by an
 * exhaustive sweep. Beyond the cap, value iteration runs on the proper
 * subgraph (the largest state set in which every member has an action whose
 * outcomes stay inside and can still reach the goal), a greedy policy is
 * extracted with a fewest-expected-hops tie-break, and its exact evaluation
 * certifies the result. An error is raised when no proper policy exists or
 * the greedy policy violates a constraint (the maximum is then not
 * certifiable without enumeration).
 */
double normalize_quality_scale(const CsspMdp& mdp, const ExactOptions& opts = {});

} // namespace sdmlab
