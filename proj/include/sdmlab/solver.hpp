#pragma once

#include <optional>

#include "sdmlab/mc.hpp"

namespace sdmlab {

enum class ScorerKind { monte_carlo, bootstrap, exact };

/// Scoring configuration of the general solver loop.
struct ScorerSpec {
    ScorerKind kind = ScorerKind::monte_carlo;
    int rollouts = 5;    // monte_carlo: trajectories per call
    double alpha = 0.2;  // bootstrap: TD learning rate, in (0, 1]
    int sweeps = 1;      // bootstrap: rollouts per call (0 reads the table)
    int max_steps = 256;
    bool truncated_cost = false;
};

struct SolverConfig {
    std::optional<FactorizedDistribution> prior; // empty = uniform
    ScorerSpec scorer;
    int baseline_window = 64; // running-mean window; also the drift window
    uint64_t budget = 10'000; // iterations; 0 returns the prior, flagged
    double epsilon = 1e-6;    // max-norm drift threshold for convergence
    uint64_t seed = 0;
    double weight_floor = 1e-9;
    double factor_cap = 1e3;
    int greedy_eval_stride = 0; // exact-eval the greedy policy every stride iterations
    int probe_steps = 1000;     // online-efficiency probe length (0 disables)
    int threads = 0;
};

struct IterationRecord {
    uint64_t iter = 0;
    uint64_t policy_digest = 0; // FNV-1a of the sampled slot assignment
    double score = 0.0;
    double factor = 0.0;
    double drift = 0.0;
};

/// Exact quality of the greedy determinization, recorded every
/// greedy_eval_stride iterations (and always at the end).
struct GreedyProbe {
    uint64_t iter = 0;
    double quality = 0.0;
};

/// Online-efficiency measurements from a probe rollout.
struct OnlineStats {
    double mean_selection_seconds = 0.0;
    double max_selection_seconds = 0.0;
    uint64_t memory_entries = 0; // stored table entries backing selection
    uint64_t probe_steps = 0;
};

struct SolverTrace {
    std::vector<IterationRecord> iterations;
    FactorizedDistribution final_estimate;
    DeterministicPolicy greedy;
    std::vector<GreedyProbe> greedy_probes;
    bool converged = false;
    bool budget_exhausted = false;
    bool degenerate_budget = false; // budget 0: prior returned untouched
    uint64_t iterations_run = 0;
    uint64_t total_scorer_rollouts = 0;
    double wall_seconds = 0.0;       // offline time (not canonical)
    uint64_t peak_weight_entries = 0; // logical memory of the estimate (+ scorer tables)
    OnlineStats online;
    bool online_measured = false;
};

/// Starting estimate: uniform weights, or a validated copy of the supplied
/// prior. Errors when the prior does not cover the key space exactly.
FactorizedDistribution init_estimate(const SolverConfig& config,
                                     std::shared_ptr<const KeySpace> space);

/// Monte Carlo scorer: set quality from n trajectories per MDP.
double score_monte_carlo(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                         int n, int max_steps, SeedStream& stream);

/**
 * Bootstrapping scorer with a persistent per-key cost-to-goal table
 * (initialized pessimistically to max_steps). Each call runs `sweeps`
 * rollouts, applying the TD update v(s) <- (1-alpha) v(s) + alpha (c + v(s'))
 * along sampled transitions, and returns the product over MDPs of
 * 1/max(v(initial), 1/cap) when the call's rollouts all reached the goal,
 * else 0. With zero sweeps the table is read without evidence gating.
 * The table persists across calls; that persistence is the leverage.
 */
class BootstrapScorer {
  public:
    BootstrapScorer(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                    const ScorerSpec& spec, double quality_cap = kDefaultQualityCap);

    double score(const std::vector<int>& slots, SeedStream& stream);

    const std::vector<double>& values() const { return v_; }
    uint64_t table_entries() const { return v_.size(); }

  private:
    const std::vector<CsspMdp>& mdps_;
    const KeySpace& space_;
    ScorerSpec spec_;
    double quality_cap_;
    std::vector<double> v_; // per key
};

/// Multiplicative Bayes update on an explicit estimate: the sampled policy's
/// mass is scaled by f = score/baseline (capped), floored, renormalized.
ExplicitDistribution bayes_update_explicit(const ExplicitDistribution& est,
                                           const DeterministicPolicy& policy, double score,
                                           double baseline, double weight_floor = 1e-9,
                                           double factor_cap = 1e3);

/// Multiplicative Bayes update on a factorized estimate: at every key the
/// weight of the sampled policy's action is scaled by f = score/baseline
/// (capped), floored. Unsampled actions keep their weights, so any policy's
/// implied probability moves by f^(shared keys): similarity propagation.
FactorizedDistribution bayes_update_factorized(const FactorizedDistribution& est,
                                               const DeterministicPolicy& policy, double score,
                                               double baseline, double weight_floor = 1e-9,
                                               double factor_cap = 1e3);

/**
 * The general solve loop: init from prior, then repeat sample / score /
 * multiplicative update until the per-key marginals drift below epsilon for
 * a full window or the budget runs out. Returns the final stochastic
 * estimate, its greedy determinization, the full iteration trace, and
 * offline/online efficiency stats. Budget exhaustion is a normal, flagged
 * outcome.
 */
SolverTrace run_general_sdm(const std::vector<CsspMdp>& train, const ContextSpec& spec,
                            const SolverConfig& config);

/// Mean/max wall-clock per action selection over a probe rollout on `mdp`,
/// plus the logical memory backing selection. Same seed, same action
/// sequence.
OnlineStats measure_online(const DeterministicPolicy& policy, const CsspMdp& mdp, int probe_steps,
                           uint64_t seed = 0);
OnlineStats measure_online(const FactorizedDistribution& dist, const CsspMdp& mdp, int probe_steps,
                           uint64_t seed = 0);

// --- JSON -------------------------------------------------------------------

/// SolverConfig document (all fields optional, defaults above):
///   {"scorer": {"kind": "monte_carlo"|"bootstrap"|"exact", "rollouts": n,
///               "alpha": a, "sweeps": k, "max_steps": h},
///    "baseline_window": w, "budget": b, "epsilon": e, "seed": s,
///    "weight_floor": f, "factor_cap": c, "greedy_eval_stride": g,
///    "probe_steps": p}
SolverConfig solver_config_from_json(const nlohmann::json& doc);
nlohmann::json solver_config_to_json(const SolverConfig& config);

/// Iteration trace as CSV ("iter,score,factor,drift" header included).
std::string trace_csv(const SolverTrace& trace);

} // namespace sdmlab
