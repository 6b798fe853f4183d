#include "sdmlab/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "sdmlab/error.hpp"

namespace sdmlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RolloutOptions rollout_options(const EstimatorConfig& config) {
    RolloutOptions opts;
    opts.max_steps = config.max_steps;
    opts.quality_cap = config.quality_cap;
    opts.constraint_tol = config.constraint_tol;
    opts.truncated_cost = config.truncated_cost;
    opts.paired_streams = config.paired_streams;
    return opts;
}

ExactOptions exact_options(const EstimatorConfig& config) {
    ExactOptions opts;
    opts.quality_cap = config.quality_cap;
    opts.constraint_tol = config.constraint_tol;
    opts.threads = config.threads;
    return opts;
}

/// One trajectory under a row-lookup callable, drawing one uniform per step
/// from the given stream. Appends to the batch arrays at position t.
template <class RowOf>
void walk_into(const CsspMdp& mdp, RowOf&& row_of, int max_steps, SeedStream& stream,
               TrajectoryBatch& batch, int t) {
    const int k_dims = mdp.num_constraints;
    int s = mdp.initial_state;
    double cost = 0.0;
    double* dtot = batch.constraint_totals.data() + static_cast<size_t>(t) * k_dims;
    for (int k = 0; k < k_dims; ++k) dtot[k] = 0.0;
    int step = 0;
    while (s != mdp.goal_state && step < max_steps) {
        const std::vector<Outcome>& outs = mdp.transitions[s][row_of(s)];
        double u = stream.next_double();
        double mass = 0.0;
        const Outcome* pick = &outs.back();
        for (const Outcome& o : outs) {
            mass += o.prob;
            if (u < mass) {
                pick = &o;
                break;
            }
        }
        cost += pick->cost;
        for (int k = 0; k < k_dims; ++k) dtot[k] += pick->constraint_costs[k];
        s = pick->next;
        ++step;
    }
    batch.total_costs[t] = cost;
    batch.reached_goal[t] = (s == mdp.goal_state) ? 1 : 0;
    batch.steps[t] = step;
}

TrajectoryBatch empty_batch(const CsspMdp& mdp, int n, int max_steps) {
    TrajectoryBatch batch;
    batch.n = n;
    batch.max_steps = max_steps;
    batch.num_constraints = mdp.num_constraints;
    batch.total_costs.resize(n);
    batch.constraint_totals.resize(static_cast<size_t>(n) * mdp.num_constraints);
    batch.reached_goal.resize(n);
    batch.steps.resize(n);
    return batch;
}

/// Cached policy-row resolution for repeated walks of one MDP.
struct RowCache {
    const CsspMdp* mdp;
    const DeterministicPolicy* policy;
    std::vector<uint64_t> ctx;
    std::vector<int> rows;

    RowCache(const CsspMdp& m, const DeterministicPolicy& p)
        : mdp(&m), policy(&p), ctx(context_of(m, p.context)), rows(m.num_states, -2) {}

    int operator()(int s) {
        int& row = rows[s];
        if (row == -2) {
            int action = policy->action_at(InputKey{ctx, s});
            row = mdp->slot_of(s, action);
            if (row < 0)
                throw Error("policy picks action " + std::to_string(action) +
                            " which is not applicable in state " + std::to_string(s));
        }
        return row;
    }
};

} // namespace

McQuality mc_policy_quality(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                            int n, int max_steps, SeedStream& stream, const RolloutOptions& opts) {
    if (n <= 0) throw Error("rollout count must be positive");
    McQuality out;
    out.set_quality = 1.0;
    for (const CsspMdp& mdp : mdps) {
        RowCache row_of(mdp, policy);
        TrajectoryBatch batch = empty_batch(mdp, n, max_steps);
        for (int t = 0; t < n; ++t) walk_into(mdp, row_of, max_steps, stream, batch, t);
        QualityEstimate est = kernels::batch_quality(mdp, n, batch.total_costs.data(),
                                                     batch.constraint_totals.data(),
                                                     batch.reached_goal.data(), opts);
        out.set_quality *= est.quality;
        out.per_mdp.push_back(std::move(est));
        out.batches.push_back(std::move(batch));
    }
    return out;
}

McQuality mc_policy_quality(const std::vector<CsspMdp>& mdps, const FactorizedDistribution& dist,
                            int n, int max_steps, SeedStream& stream, const RolloutOptions& opts) {
    if (n <= 0) throw Error("rollout count must be positive");
    McQuality out;
    out.set_quality = 1.0;
    for (const CsspMdp& mdp : mdps) {
        TrajectoryBatch batch = empty_batch(mdp, n, max_steps);
        for (int t = 0; t < n; ++t) {
            // A fresh policy per trajectory: the batch estimates the
            // distribution's expected behavior, not one sample's.
            DeterministicPolicy policy = sample_policy(dist, stream);
            RowCache row_of(mdp, policy);
            walk_into(mdp, row_of, max_steps, stream, batch, t);
        }
        QualityEstimate est = kernels::batch_quality(mdp, n, batch.total_costs.data(),
                                                     batch.constraint_totals.data(),
                                                     batch.reached_goal.data(), opts);
        out.set_quality *= est.quality;
        out.per_mdp.push_back(std::move(est));
        out.batches.push_back(std::move(batch));
    }
    return out;
}

// --- difficulty -------------------------------------------------------------

namespace {

std::vector<double> rescale_factors(const std::vector<CsspMdp>& mdps,
                                    const EstimatorConfig& config) {
    if (!config.rescale) return {};
    std::vector<double> scale;
    scale.reserve(mdps.size());
    for (const CsspMdp& mdp : mdps) scale.push_back(normalize_quality_scale(mdp, exact_options(config)));
    return scale;
}

} // namespace

DifficultyReport estimate_task_difficulty(const std::vector<CsspMdp>& train,
                                          const std::vector<CsspMdp>& test,
                                          const ContextSpec& spec, const EstimatorConfig& config) {
    if (train.empty()) throw Error("difficulty needs a nonempty train set");
    if (config.samples == 0) throw Error("difficulty needs at least one sample");
    std::vector<CsspMdp> all = train;
    all.insert(all.end(), test.begin(), test.end());
    KeySpace space(all, spec);
    std::vector<double> scale = rescale_factors(all, config);

    std::vector<double> qa(config.samples), qb(config.samples);
    kernels::mc_quality_sweep(all, space, kernels::PolicySource{}, config.samples, config.rollouts,
                              static_cast<int>(train.size()), scale, config.seed,
                              rollout_options(config), qa.data(), qb.data(), config.threads);

    double mean_a = 0.0, gap = 0.0;
    for (uint64_t i = 0; i < config.samples; ++i) {
        mean_a += qa[i];
        double d = qa[i] - qb[i];
        gap += d * d;
    }
    mean_a /= static_cast<double>(config.samples);
    gap /= static_cast<double>(config.samples);

    DifficultyReport report;
    report.method = "monte_carlo";
    report.sample_count = config.samples;
    report.rollouts_per_policy = config.rollouts;
    report.seed = config.seed;
    report.distance_term = gap;
    if (mean_a > 0.0) {
        report.train_term = 1.0 / mean_a;
    } else {
        report.train_term = kInf;
        report.degenerate = true;
    }
    report.total = report.train_term + report.distance_term;
    return report;
}

DifficultyReport estimate_set_distance(const std::vector<CsspMdp>& a,
                                       const std::vector<CsspMdp>& b, const ContextSpec& spec,
                                       const EstimatorConfig& config) {
    if (a.empty() || b.empty()) throw Error("set distance needs two nonempty MDP sets");
    DifficultyReport report = estimate_task_difficulty(a, b, spec, config);
    report.train_term = 0.0;
    report.degenerate = false;
    report.total = report.distance_term;
    return report;
}

// --- prior difficulty -------------------------------------------------------

namespace {

PriorDifficulty prior_difficulty_from_sweep(const std::vector<CsspMdp>& train,
                                            const KeySpace& space,
                                            const kernels::PolicySource& source,
                                            const EstimatorConfig& config) {
    if (config.samples == 0) throw Error("prior difficulty needs at least one sample");
    std::vector<double> scale = rescale_factors(train, config);
    std::vector<double> q(config.samples);
    kernels::mc_quality_sweep(train, space, source, config.samples, config.rollouts,
                              static_cast<int>(train.size()), scale, config.seed,
                              rollout_options(config), q.data(), nullptr, config.threads);
    double mean = 0.0;
    for (double x : q) mean += x;
    mean /= static_cast<double>(config.samples);

    PriorDifficulty out;
    out.samples = config.samples;
    out.seed = config.seed;
    if (mean > 0.0) {
        out.value = 1.0 / mean;
    } else {
        out.value = kInf;
        out.degenerate = true;
    }
    return out;
}

} // namespace

PriorDifficulty estimate_prior_difficulty(const std::vector<CsspMdp>& train,
                                          const FactorizedDistribution& prior,
                                          const ContextSpec& spec, const EstimatorConfig& config) {
    if (train.empty()) throw Error("prior difficulty needs a nonempty train set");
    if (!prior.space || prior.space->spec() != spec ||
        prior.space->num_mdps() != static_cast<int>(train.size()))
        throw Error("prior distribution was built over a different key space");
    KeySpace expected(train, spec);
    if (prior.space->keys() != expected.keys())
        throw Error("prior distribution was built over a different key space");
    for (int k = 0; k < expected.num_keys(); ++k)
        if (prior.space->key_actions(k) != expected.key_actions(k))
            throw Error("prior distribution was built over a different key space");
    kernels::PolicySource source;
    source.factorized = &prior;
    return prior_difficulty_from_sweep(train, *prior.space, source, config);
}

PriorDifficulty estimate_prior_difficulty(const std::vector<CsspMdp>& train,
                                          const ExplicitDistribution& prior,
                                          const ContextSpec& spec, const EstimatorConfig& config) {
    if (train.empty()) throw Error("prior difficulty needs a nonempty train set");
    validate(prior);
    KeySpace space(train, spec);
    std::vector<std::vector<int>> slots;
    slots.reserve(prior.support->size());
    for (const DeterministicPolicy& policy : *prior.support)
        slots.push_back(compile_policy(space, policy));
    kernels::PolicySource source;
    source.explicit_slots = &slots;
    source.explicit_probs = &prior.prob;
    return prior_difficulty_from_sweep(train, space, source, config);
}

// --- knowledge quantities ---------------------------------------------------

namespace {

void sample_uniform_slots(const KeySpace& space, SeedStream& stream, std::vector<int>& slots) {
    slots.resize(space.num_keys());
    for (int k = 0; k < space.num_keys(); ++k)
        slots[k] = static_cast<int>(stream.next_below(space.key_actions(k).size()));
}

/// Reference quality of one policy on one MDP: exact when tractable, a
/// high-precision strict rollout estimate otherwise. The rollout fallback
/// only triggers for stochastic MDPs too large for the linear-solve route.
double reference_quality(const CsspMdp& mdp, const DeterministicPolicy& policy,
                         const EstimatorConfig& config, const SeedStream& fallback_base) {
    if (mdp.deterministic() || mdp.num_states <= 4096)
        return exact_policy_evaluation(mdp, policy, exact_options(config)).quality;
    RowCache row_of(mdp, policy);
    TrajectoryBatch batch = empty_batch(mdp, config.reference_rollouts, config.max_steps);
    for (int t = 0; t < config.reference_rollouts; ++t) {
        SeedStream stream = fallback_base.child("traj", static_cast<uint64_t>(t));
        walk_into(mdp, row_of, config.max_steps, stream, batch, t);
    }
    RolloutOptions opts = rollout_options(config);
    opts.truncated_cost = false;
    return kernels::batch_quality(mdp, batch.n, batch.total_costs.data(),
                                  batch.constraint_totals.data(), batch.reached_goal.data(), opts)
        .quality;
}

double reference_set_quality(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                             const std::vector<double>& scale, const EstimatorConfig& config,
                             const SeedStream& fallback_base) {
    double q = 1.0;
    for (size_t m = 0; m < mdps.size(); ++m) {
        double qm = reference_quality(mdps[m], policy, config,
                                      fallback_base.child("mdp", static_cast<uint64_t>(m)));
        if (!scale.empty()) qm = std::min(qm / scale[m], 1.0);
        q *= qm;
        if (q == 0.0) break;
    }
    return q;
}

} // namespace

QScoreResult estimate_q_score(const std::vector<CsspMdp>& train, const ScoringFunction& scorer,
                              const ContextSpec& spec, const EstimatorConfig& config) {
    if (train.empty()) throw Error("scoring-function knowledge needs a nonempty train set");
    if (config.samples == 0) throw Error("scoring-function knowledge needs at least one sample");
    KeySpace space(train, spec);
    SeedStream root(config.seed);

    // Relative differences are invariant to a global quality rescale, so the
    // reference skips the q* normalization entirely.
    const std::vector<double> no_scale;

    double dev_sum = 0.0;
    double scorer_seconds = 0.0;
    uint64_t scorer_calls = 0;
    QScoreResult out;
    out.samples = config.samples;
    out.seed = config.seed;

    std::vector<int> slots;
    for (uint64_t i = 0; i < config.samples; ++i) {
        SeedStream s1 = root.child("pair", i, 0);
        SeedStream s2 = root.child("pair", i, 1);
        sample_uniform_slots(space, s1, slots);
        DeterministicPolicy p1 = materialize_policy(space, slots);
        sample_uniform_slots(space, s2, slots);
        DeterministicPolicy p2 = materialize_policy(space, slots);

        double q1 = reference_set_quality(train, p1, no_scale, config, root.child("ref", i, 0));
        double q2 = reference_set_quality(train, p2, no_scale, config, root.child("ref", i, 1));
        if (q1 + q2 == 0.0) {
            ++out.pairs_skipped;
            continue;
        }

        SeedStream c1 = root.child("score", i, 0);
        SeedStream c2 = root.child("score", i, 1);
        auto t0 = std::chrono::steady_clock::now();
        double h1 = scorer.fn(p1, c1);
        double h2 = scorer.fn(p2, c2);
        auto t1 = std::chrono::steady_clock::now();
        scorer_seconds += std::chrono::duration<double>(t1 - t0).count();
        scorer_calls += 2;

        if (h1 + h2 == 0.0) {
            ++out.pairs_skipped;
            continue;
        }
        double r = (q1 - q2) / (q1 + q2);
        double rh = (h1 - h2) / (h1 + h2);
        dev_sum += std::abs(rh - r);
        ++out.pairs_used;
    }

    if (scorer_calls > 0) out.mean_scorer_seconds = scorer_seconds / scorer_calls;
    if (out.pairs_used == 0) {
        out.raw = 0.0;
    } else {
        double mean_dev = dev_sum / static_cast<double>(out.pairs_used);
        if (mean_dev == 0.0) {
            out.raw = config.quality_cap;
            out.capped = true;
        } else {
            out.raw = 1.0 / mean_dev;
        }
    }
    if (out.mean_scorer_seconds > 0.0) out.per_second = out.raw / out.mean_scorer_seconds;
    return out;
}

QSimResult estimate_q_sim(const std::vector<CsspMdp>& train, const SimilarityFunction& simfn,
                          const ContextSpec& spec, const EstimatorConfig& config) {
    if (train.empty()) throw Error("similarity-function knowledge needs a nonempty train set");
    if (config.samples == 0) throw Error("similarity-function knowledge needs at least one sample");
    KeySpace space(train, spec);
    SeedStream root(config.seed);

    // Quality gaps are compared against 1 - sim, so qualities must live in
    // [0, 1]: the q* rescale is mandatory here.
    std::vector<double> scale;
    for (const CsspMdp& mdp : train) scale.push_back(normalize_quality_scale(mdp, exact_options(config)));

    double dev_sum = 0.0;
    std::vector<int> slots;
    for (uint64_t i = 0; i < config.samples; ++i) {
        SeedStream s1 = root.child("pair", i, 0);
        SeedStream s2 = root.child("pair", i, 1);
        sample_uniform_slots(space, s1, slots);
        DeterministicPolicy p1 = materialize_policy(space, slots);
        sample_uniform_slots(space, s2, slots);
        DeterministicPolicy p2 = materialize_policy(space, slots);

        double q1 = reference_set_quality(train, p1, scale, config, root.child("ref", i, 0));
        double q2 = reference_set_quality(train, p2, scale, config, root.child("ref", i, 1));
        double sim = simfn.fn(p1, p2);
        dev_sum += std::abs(std::abs(q1 - q2) - (1.0 - sim));
    }

    QSimResult out;
    out.samples = config.samples;
    out.seed = config.seed;
    double mean_dev = dev_sum / static_cast<double>(config.samples);
    if (mean_dev == 0.0) {
        out.value = config.quality_cap;
        out.capped = true;
    } else {
        out.value = 1.0 / mean_dev;
    }
    return out;
}

// --- final evaluation -------------------------------------------------------

FinalQuality evaluate_final_policy(const std::vector<CsspMdp>& test,
                                   const DeterministicPolicy& policy, int rollouts, int max_steps,
                                   uint64_t seed, const RolloutOptions& opts) {
    if (rollouts <= 0) throw Error("rollout count must be positive");
    SeedStream root(seed);
    FinalQuality out;
    out.set_quality = 1.0;
    for (size_t m = 0; m < test.size(); ++m) {
        RowCache row_of(test[m], policy);
        TrajectoryBatch batch = empty_batch(test[m], rollouts, max_steps);
        SeedStream base = root.child("final", static_cast<uint64_t>(m));
        for (int t = 0; t < rollouts; ++t) {
            SeedStream stream = base.child("traj", static_cast<uint64_t>(t));
            walk_into(test[m], row_of, max_steps, stream, batch, t);
        }
        QualityEstimate est = kernels::batch_quality(test[m], rollouts, batch.total_costs.data(),
                                                     batch.constraint_totals.data(),
                                                     batch.reached_goal.data(), opts);
        out.set_quality *= est.quality;
        out.per_mdp.push_back(std::move(est));
    }
    return out;
}

FinalQuality evaluate_final_policy(const std::vector<CsspMdp>& test,
                                   const FactorizedDistribution& dist, int rollouts, int max_steps,
                                   uint64_t seed, const RolloutOptions& opts) {
    if (rollouts <= 0) throw Error("rollout count must be positive");
    SeedStream root(seed);
    FinalQuality out;
    out.set_quality = 1.0;
    for (size_t m = 0; m < test.size(); ++m) {
        TrajectoryBatch batch = empty_batch(test[m], rollouts, max_steps);
        SeedStream base = root.child("final", static_cast<uint64_t>(m));
        for (int t = 0; t < rollouts; ++t) {
            SeedStream pick = base.child("pick", static_cast<uint64_t>(t));
            DeterministicPolicy policy = sample_policy(dist, pick);
            RowCache row_of(test[m], policy);
            SeedStream stream = base.child("traj", static_cast<uint64_t>(t));
            walk_into(test[m], row_of, max_steps, stream, batch, t);
        }
        QualityEstimate est = kernels::batch_quality(test[m], rollouts, batch.total_costs.data(),
                                                     batch.constraint_totals.data(),
                                                     batch.reached_goal.data(), opts);
        out.set_quality *= est.quality;
        out.per_mdp.push_back(std::move(est));
    }
    return out;
}

// --- built-in scorers and similarity functions ------------------------------

ScoringFunction make_exact_scorer(std::vector<CsspMdp> mdps, const ExactOptions& opts) {
    ScoringFunction out;
    out.name = "exact";
    out.fn = [mdps = std::move(mdps), opts](const DeterministicPolicy& policy, SeedStream&) {
        return quality_on_set(mdps, policy, opts);
    };
    return out;
}

ScoringFunction make_mc_scorer(std::vector<CsspMdp> mdps, int rollouts, int max_steps) {
    ScoringFunction out;
    out.name = "mc";
    out.fn = [mdps = std::move(mdps), rollouts,
              max_steps](const DeterministicPolicy& policy, SeedStream& stream) {
        return mc_policy_quality(mdps, policy, rollouts, max_steps, stream).set_quality;
    };
    return out;
}

ScoringFunction make_noisy_scorer(std::vector<CsspMdp> mdps, double sigma,
                                  const ExactOptions& opts) {
    ScoringFunction out;
    out.name = "noisy";
    out.fn = [mdps = std::move(mdps), sigma, opts](const DeterministicPolicy& policy,
                                                   SeedStream& stream) {
        double q = quality_on_set(mdps, policy, opts);
        // Additive Gaussian noise, clamped: a scorer never reports a
        // negative quality.
        return std::max(0.0, q + sigma * stream.next_gaussian());
    };
    return out;
}

SimilarityFunction make_overlap_similarity() {
    SimilarityFunction out;
    out.name = "overlap";
    out.fn = [](const DeterministicPolicy& a, const DeterministicPolicy& b) {
        return similarity(a, b);
    };
    return out;
}

SimilarityFunction make_constant_similarity(double value) {
    SimilarityFunction out;
    out.name = "constant";
    out.fn = [value](const DeterministicPolicy&, const DeterministicPolicy&) { return value; };
    return out;
}

} // namespace sdmlab
