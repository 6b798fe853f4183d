#pragma once

#include <functional>

#include "sdmlab/kernels.hpp"

namespace sdmlab {

using kernels::RolloutOptions;

/// Raw per-trajectory samples from one policy on one MDP.
struct TrajectoryBatch {
    int n = 0;
    int max_steps = 0;
    int num_constraints = 0;
    std::vector<double> total_costs;       // n entries
    std::vector<double> constraint_totals; // n * K, trajectory-major
    std::vector<uint8_t> reached_goal;     // n entries
    std::vector<int> steps;                // n entries
};

/// Common knobs of the Monte Carlo estimators.
struct EstimatorConfig {
    uint64_t samples = 10'000; // policies (or pairs) to draw
    int rollouts = 100;        // trajectories per policy per MDP
    int max_steps = 256;
    uint64_t seed = 0;
    bool rescale = true;        // divide per-MDP qualities by q*
    bool truncated_cost = false;
    bool paired_streams = true;
    int threads = 0;
    double quality_cap = kDefaultQualityCap;
    double constraint_tol = 1e-9;
    int reference_rollouts = 100'000; // Q_score fallback reference precision
};

/// Per-MDP Monte Carlo estimates plus the set-quality product.
struct McQuality {
    std::vector<QualityEstimate> per_mdp;
    std::vector<TrajectoryBatch> batches;
    double set_quality = 0.0;
};

/**
 * Monte Carlo policy quality: n trajectories per MDP, capped at max_steps.
 * A trajectory that misses the goal marks the policy improper on that MDP
 * (quality 0) unless truncated-cost scoring is enabled in `opts`. Otherwise
 * quality comes from the averaged totals and the constraint checks, and the
 * set quality is the product across MDPs. Deterministic in the stream state.
 */
McQuality mc_policy_quality(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                            int n, int max_steps, SeedStream& stream,
                            const RolloutOptions& opts = {});
McQuality mc_policy_quality(const std::vector<CsspMdp>& mdps, const FactorizedDistribution& dist,
                            int n, int max_steps, SeedStream& stream,
                            const RolloutOptions& opts = {});

/**
 * Monte Carlo task difficulty: samples config.samples policies uniformly,
 * scores each on train and test with shared per-policy rollout streams, and
 * reports (mean rescaled train quality)^-1 plus the mean squared train/test
 * quality gap. A zero train mean becomes the +infinity sentinel with
 * degenerate=true.
 */
DifficultyReport estimate_task_difficulty(const std::vector<CsspMdp>& train,
                                          const std::vector<CsspMdp>& test,
                                          const ContextSpec& spec, const EstimatorConfig& config);

/// Monte Carlo distance between two MDP sets: the mean squared quality gap
/// under uniform policy sampling over the combined key space.
DifficultyReport estimate_set_distance(const std::vector<CsspMdp>& a,
                                       const std::vector<CsspMdp>& b, const ContextSpec& spec,
                                       const EstimatorConfig& config);

/// Prior-aware difficulty: the inverse-mean-quality term with policies drawn
/// from the supplied prior instead of uniformly.
struct PriorDifficulty {
    double value = 0.0;
    bool degenerate = false;
    uint64_t samples = 0;
    uint64_t seed = 0;
};
PriorDifficulty estimate_prior_difficulty(const std::vector<CsspMdp>& train,
                                          const FactorizedDistribution& prior,
                                          const ContextSpec& spec, const EstimatorConfig& config);
PriorDifficulty estimate_prior_difficulty(const std::vector<CsspMdp>& train,
                                          const ExplicitDistribution& prior,
                                          const ContextSpec& spec, const EstimatorConfig& config);

/// A scoring function under evaluation. The stream argument makes noisy
/// scorers deterministic per call site.
struct ScoringFunction {
    std::string name;
    std::function<double(const DeterministicPolicy&, SeedStream&)> fn;
};

/// A policy-similarity function under evaluation.
struct SimilarityFunction {
    std::string name;
    std::function<double(const DeterministicPolicy&, const DeterministicPolicy&)> fn;
};

/**
 * Scoring-function knowledge: over sampled uniform policy pairs,
 * mean | (q^_1 - q^_2)/(q^_1 + q^_2) - (q_1 - q_2)/(q_1 + q_2) |, inverted.
 * Reference qualities q come from exact evaluation (rescaled); pairs with an
 * exactly zero denominator are skipped and counted. A zero mean deviation is
 * reported as the capped maximum. The time-normalized variant divides by the
 * mean wall-clock seconds per scorer call and is therefore not canonical.
 */
struct QScoreResult {
    double raw = 0.0;
    bool capped = false;
    double per_second = 0.0;         // raw / mean_scorer_seconds (timing-derived)
    double mean_scorer_seconds = 0.0;
    uint64_t pairs_used = 0;
    uint64_t pairs_skipped = 0;
    uint64_t samples = 0;
    uint64_t seed = 0;
};
QScoreResult estimate_q_score(const std::vector<CsspMdp>& train, const ScoringFunction& scorer,
                              const ContextSpec& spec, const EstimatorConfig& config);

/// Similarity-function knowledge: mean | |q1 - q2| - (1 - sim) | over
/// sampled pairs with qualities rescaled to [0,1], inverted (capped at zero
/// deviation).
struct QSimResult {
    double value = 0.0;
    bool capped = false;
    uint64_t samples = 0;
    uint64_t seed = 0;
};
QSimResult estimate_q_sim(const std::vector<CsspMdp>& train, const SimilarityFunction& simfn,
                          const ContextSpec& spec, const EstimatorConfig& config);

/// Final-quality evaluation on the test set: per-MDP Monte Carlo quality,
/// multiplied. The distribution overload draws one policy per trajectory.
struct FinalQuality {
    std::vector<QualityEstimate> per_mdp;
    double set_quality = 0.0;
};
FinalQuality evaluate_final_policy(const std::vector<CsspMdp>& test,
                                   const DeterministicPolicy& policy, int rollouts, int max_steps,
                                   uint64_t seed, const RolloutOptions& opts = {});
FinalQuality evaluate_final_policy(const std::vector<CsspMdp>& test,
                                   const FactorizedDistribution& dist, int rollouts, int max_steps,
                                   uint64_t seed, const RolloutOptions& opts = {});

// Built-in scorers and similarity functions (used by the CLI and tests).
// Each captures its task set by value.
ScoringFunction make_exact_scorer(std::vector<CsspMdp> mdps, const ExactOptions& opts = {});
ScoringFunction make_mc_scorer(std::vector<CsspMdp> mdps, int rollouts, int max_steps);
ScoringFunction make_noisy_scorer(std::vector<CsspMdp> mdps, double sigma,
                                  const ExactOptions& opts = {});
SimilarityFunction make_overlap_similarity();
SimilarityFunction make_constant_similarity(double value);

} // namespace sdmlab
