#include "sdmlab/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sdmlab/error.hpp"

namespace sdmlab {

namespace {

void check_config(const SolverConfig& config) {
    if (config.baseline_window < 1) throw Error("baseline window must be at least 1");
    if (!(config.epsilon > 0.0)) throw Error("epsilon must be positive");
    if (!(config.weight_floor > 0.0) || config.weight_floor >= 1.0)
        throw Error("weight floor must lie in (0, 1)");
    if (!(config.factor_cap >= 1.0)) throw Error("factor cap must be at least 1");
    if (config.greedy_eval_stride < 0) throw Error("greedy evaluation stride must be nonnegative");
    if (config.probe_steps < 0) throw Error("probe steps must be nonnegative");
    const ScorerSpec& s = config.scorer;
    if (s.max_steps < 1) throw Error("scorer max_steps must be at least 1");
    if (s.kind == ScorerKind::monte_carlo && s.rollouts < 1)
        throw Error("Monte Carlo scorer needs at least one rollout");
    if (s.kind == ScorerKind::bootstrap) {
        if (!(s.alpha > 0.0) || s.alpha > 1.0)
            throw Error("bootstrap learning rate must lie in (0, 1]");
        if (s.sweeps < 0) throw Error("bootstrap sweep count must be nonnegative");
    }
}

uint64_t slots_digest(const std::vector<int>& slots) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int s : slots) {
        unsigned char b[4] = {static_cast<unsigned char>(s), static_cast<unsigned char>(s >> 8),
                              static_cast<unsigned char>(s >> 16),
                              static_cast<unsigned char>(s >> 24)};
        h = detail::fnv1a_bytes(b, 4, h);
    }
    return h;
}

/// Sampled action's weight scaled by f at every key, then a max-to-1 rescale
/// and the positivity floor per key. Keeps every weight in [floor, 1].
void apply_update(FactorizedDistribution& est, const std::vector<int>& slots, double factor,
                  double floor) {
    for (size_t k = 0; k < est.weights.size(); ++k) {
        std::vector<double>& w = est.weights[k];
        w[slots[k]] *= factor;
        double top = *std::max_element(w.begin(), w.end());
        if (top <= 0.0) {
            // Every action crushed to nothing: reset the key to uniform.
            std::fill(w.begin(), w.end(), 1.0);
            continue;
        }
        for (double& x : w) x = std::max(x / top, floor);
    }
}

std::vector<int> greedy_slots(const FactorizedDistribution& est) {
    std::vector<int> slots(est.weights.size());
    for (size_t k = 0; k < est.weights.size(); ++k) {
        const std::vector<double>& w = est.weights[k];
        int best = 0;
        for (size_t j = 1; j < w.size(); ++j)
            if (w[j] > w[best]) best = static_cast<int>(j);
        slots[k] = best;
    }
    return slots;
}

uint64_t weight_entries(const FactorizedDistribution& est) {
    uint64_t n = 0;
    for (const std::vector<double>& w : est.weights) n += w.size();
    return n;
}

double marginal_drift(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b) {
    double drift = 0.0;
    for (size_t k = 0; k < a.size(); ++k)
        for (size_t j = 0; j < a[k].size(); ++j)
            drift = std::max(drift, std::abs(a[k][j] - b[k][j]));
    return drift;
}

} // namespace

FactorizedDistribution init_estimate(const SolverConfig& config,
                                     std::shared_ptr<const KeySpace> space) {
    if (!config.prior) return uniform_factorized(std::move(space));
    const FactorizedDistribution& prior = *config.prior;
    validate(prior);
    if (!prior.space || prior.space->keys() != space->keys())
        throw Error("prior does not cover the task's key space");
    for (int k = 0; k < space->num_keys(); ++k)
        if (prior.space->key_actions(k) != space->key_actions(k))
            throw Error("prior action lists do not match the task's key space");
    FactorizedDistribution out;
    out.space = std::move(space);
    out.weights = prior.weights;
    return out;
}

double score_monte_carlo(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                         int n, int max_steps, SeedStream& stream) {
    RolloutOptions opts;
    opts.max_steps = max_steps;
    return mc_policy_quality(mdps, policy, n, max_steps, stream, opts).set_quality;
}

// --- bootstrap scorer -------------------------------------------------------

BootstrapScorer::BootstrapScorer(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                 const ScorerSpec& spec, double quality_cap)
    : mdps_(mdps), space_(space), spec_(spec), quality_cap_(quality_cap) {
    // Pessimistic start: every key as costly as a full-length rollout, so
    // unexplored regions never look better than explored ones.
    v_.assign(space.num_keys(), static_cast<double>(spec.max_steps));
}

double BootstrapScorer::score(const std::vector<int>& slots, SeedStream& stream) {
    bool all_reached = true;
    for (size_t m = 0; m < mdps_.size(); ++m) {
        const CsspMdp& mdp = mdps_[m];
        for (int sweep = 0; sweep < spec_.sweeps; ++sweep) {
            int s = mdp.initial_state;
            int step = 0;
            while (s != mdp.goal_state && step < spec_.max_steps) {
                int k = space_.key_of_state(static_cast<int>(m), s);
                int row = space_.mdp_slot(static_cast<int>(m), k, slots[k]);
                const std::vector<Outcome>& outs = mdp.transitions[s][row];
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
                double tail = 0.0;
                if (pick->next != mdp.goal_state)
                    tail = v_[space_.key_of_state(static_cast<int>(m), pick->next)];
                v_[k] = (1.0 - spec_.alpha) * v_[k] + spec_.alpha * (pick->cost + tail);
                s = pick->next;
                ++step;
            }
            all_reached = all_reached && (s == mdp.goal_state);
        }
    }
    if (spec_.sweeps > 0 && !all_reached) return 0.0;

    double q = 1.0;
    for (size_t m = 0; m < mdps_.size(); ++m) {
        const CsspMdp& mdp = mdps_[m];
        double v0 = 0.0;
        if (mdp.initial_state != mdp.goal_state)
            v0 = v_[space_.key_of_state(static_cast<int>(m), mdp.initial_state)];
        q *= 1.0 / std::max(v0, 1.0 / quality_cap_);
    }
    return q;
}

// --- Bayes updates ----------------------------------------------------------

ExplicitDistribution bayes_update_explicit(const ExplicitDistribution& est,
                                           const DeterministicPolicy& policy, double score,
                                           double baseline, double weight_floor,
                                           double factor_cap) {
    double factor = baseline > 0.0 ? std::min(score / baseline, factor_cap) : 1.0;
    ExplicitDistribution out = est;
    size_t idx = out.support->size();
    for (size_t i = 0; i < out.support->size(); ++i)
        if ((*out.support)[i] == policy) {
            idx = i;
            break;
        }
    if (idx == out.support->size()) throw Error("updated policy is not in the support");
    out.prob[idx] *= factor;
    double z = 0.0;
    for (double& p : out.prob) {
        p = std::max(p, weight_floor);
        z += p;
    }
    for (double& p : out.prob) p /= z;
    return out;
}

FactorizedDistribution bayes_update_factorized(const FactorizedDistribution& est,
                                               const DeterministicPolicy& policy, double score,
                                               double baseline, double weight_floor,
                                               double factor_cap) {
    double factor = baseline > 0.0 ? std::min(score / baseline, factor_cap) : 1.0;
    FactorizedDistribution out = est;
    std::vector<int> slots = compile_policy(*est.space, policy);
    apply_update(out, slots, factor, weight_floor);
    return out;
}

// --- the general loop -------------------------------------------------------

SolverTrace run_general_sdm(const std::vector<CsspMdp>& train, const ContextSpec& spec,
                            const SolverConfig& config) {
    if (train.empty()) throw Error("the solver needs a nonempty train set");
    check_config(config);
    auto wall_start = std::chrono::steady_clock::now();

    auto space = std::make_shared<const KeySpace>(train, spec);
    FactorizedDistribution est = init_estimate(config, space);

    SolverTrace trace;
    trace.peak_weight_entries = weight_entries(est);

    ExactOptions exact_opts;
    exact_opts.threads = config.threads;
    RolloutOptions mc_opts;
    mc_opts.max_steps = config.scorer.max_steps;
    mc_opts.truncated_cost = config.scorer.truncated_cost;

    std::unique_ptr<BootstrapScorer> bootstrap;
    std::unique_ptr<SetEvaluator> exact_eval;
    if (config.scorer.kind == ScorerKind::bootstrap) {
        bootstrap = std::make_unique<BootstrapScorer>(train, *space, config.scorer);
        trace.peak_weight_entries += bootstrap->table_entries();
    } else if (config.scorer.kind == ScorerKind::exact) {
        exact_eval = std::make_unique<SetEvaluator>(train, *space, exact_opts);
    }

    if (config.budget == 0) {
        trace.degenerate_budget = true;
        trace.final_estimate = est;
        trace.greedy = materialize_policy(*space, greedy_slots(est));
        if (config.probe_steps > 0) {
            trace.online = measure_online(est, train.front(), config.probe_steps, config.seed);
            trace.online_measured = true;
        }
        trace.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
        return trace;
    }

    SeedStream root(config.seed);
    std::vector<double> window;
    window.reserve(config.baseline_window);
    std::vector<std::vector<double>> prev_marginals = normalized_marginals(est);
    std::vector<int> slots;
    int calm_streak = 0;

    auto probe_greedy = [&](uint64_t iter) {
        DeterministicPolicy greedy = materialize_policy(*space, greedy_slots(est));
        trace.greedy_probes.push_back({iter, quality_on_set(train, greedy, exact_opts)});
    };

    uint64_t i = 0;
    for (; i < config.budget; ++i) {
        SeedStream ps = root.child("policy", i);
        sample_policy_slots(est, ps, slots);

        SeedStream ss = root.child("score", i);
        double score = 0.0;
        switch (config.scorer.kind) {
        case ScorerKind::monte_carlo: {
            DeterministicPolicy policy = materialize_policy(*space, slots);
            score = mc_policy_quality(train, policy, config.scorer.rollouts,
                                      config.scorer.max_steps, ss, mc_opts)
                        .set_quality;
            trace.total_scorer_rollouts +=
                static_cast<uint64_t>(config.scorer.rollouts) * train.size();
            break;
        }
        case ScorerKind::bootstrap:
            score = bootstrap->score(slots, ss);
            trace.total_scorer_rollouts +=
                static_cast<uint64_t>(config.scorer.sweeps) * train.size();
            break;
        case ScorerKind::exact:
            score = exact_eval->set_quality(slots);
            break;
        }

        if (window.size() < static_cast<size_t>(config.baseline_window)) window.push_back(score);
        else window[i % config.baseline_window] = score;
        double baseline = 0.0;
        for (double s : window) baseline += s;
        baseline /= static_cast<double>(window.size());

        double factor = baseline > 0.0 ? std::min(score / baseline, config.factor_cap) : 1.0;
        apply_update(est, slots, factor, config.weight_floor);

        std::vector<std::vector<double>> marginals = normalized_marginals(est);
        double drift = marginal_drift(marginals, prev_marginals);
        prev_marginals = std::move(marginals);

        trace.iterations.push_back({i, slots_digest(slots), score, factor, drift});

        if (config.greedy_eval_stride > 0 && (i + 1) % config.greedy_eval_stride == 0)
            probe_greedy(i + 1);

        if (drift < config.epsilon) {
            if (++calm_streak >= config.baseline_window) {
                ++i;
                trace.converged = true;
                break;
            }
        } else {
            calm_streak = 0;
        }
    }
    trace.iterations_run = i;
    trace.budget_exhausted = !trace.converged;

    trace.final_estimate = est;
    trace.greedy = materialize_policy(*space, greedy_slots(est));
    if (config.greedy_eval_stride > 0 &&
        (trace.greedy_probes.empty() || trace.greedy_probes.back().iter != i))
        probe_greedy(i);

    if (config.probe_steps > 0) {
        trace.online = measure_online(est, train.front(), config.probe_steps, config.seed);
        trace.online_measured = true;
    }
    trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return trace;
}

// --- online probes ----------------------------------------------------------

namespace {

/// Walks the MDP for probe_steps selections, timing each one; hitting the
/// goal restarts the walk. select(state) returns the chosen action.
template <class Select>
OnlineStats probe_walk(const CsspMdp& mdp, int probe_steps, uint64_t seed, uint64_t memory,
                       Select&& select) {
    OnlineStats stats;
    stats.memory_entries = memory;
    if (mdp.initial_state == mdp.goal_state || probe_steps <= 0) return stats;
    SeedStream stream = SeedStream(seed).child("probe");
    int s = mdp.initial_state;
    double total = 0.0;
    for (int t = 0; t < probe_steps; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        int action = select(s);
        auto t1 = std::chrono::steady_clock::now();
        double dt = std::chrono::duration<double>(t1 - t0).count();
        total += dt;
        stats.max_selection_seconds = std::max(stats.max_selection_seconds, dt);

        int row = mdp.slot_of(s, action);
        if (row < 0)
            throw Error("selected action " + std::to_string(action) +
                        " is not applicable in state " + std::to_string(s));
        const std::vector<Outcome>& outs = mdp.transitions[s][row];
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
        s = pick->next;
        if (s == mdp.goal_state) s = mdp.initial_state;
    }
    stats.probe_steps = probe_steps;
    stats.mean_selection_seconds = total / probe_steps;
    return stats;
}

} // namespace

OnlineStats measure_online(const DeterministicPolicy& policy, const CsspMdp& mdp, int probe_steps,
                           uint64_t seed) {
    std::vector<uint64_t> ctx = context_of(mdp, policy.context);
    InputKey probe{ctx, 0};
    return probe_walk(mdp, probe_steps, seed, policy.entries.size(), [&](int s) {
        probe.state = s;
        return policy.action_at(probe);
    });
}

OnlineStats measure_online(const FactorizedDistribution& dist, const CsspMdp& mdp, int probe_steps,
                           uint64_t seed) {
    std::vector<uint64_t> ctx = context_of(mdp, dist.space->spec());
    SeedStream pick_stream = SeedStream(seed).child("select");
    InputKey probe{ctx, 0};
    return probe_walk(mdp, probe_steps, seed, weight_entries(dist), [&](int s) {
        probe.state = s;
        int k = dist.space->find(probe);
        if (k < 0) throw Error("state " + std::to_string(s) + " has no key in the estimate");
        const std::vector<double>& w = dist.weights[k];
        double z = 0.0;
        for (double x : w) z += x;
        double u = pick_stream.next_double() * z;
        double mass = 0.0;
        size_t j = w.size() - 1;
        for (size_t a = 0; a < w.size(); ++a) {
            mass += w[a];
            if (u < mass) {
                j = a;
                break;
            }
        }
        return dist.space->key_actions(k)[j];
    });
}

// --- JSON -------------------------------------------------------------------

SolverConfig solver_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("solver config must be a JSON object");
    static const char* known[] = {"scorer",       "baseline_window", "budget",
                                  "epsilon",      "seed",            "weight_floor",
                                  "factor_cap",   "greedy_eval_stride", "probe_steps"};
    for (const auto& [key, value] : doc.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParseError("unknown solver config field \"" + key + "\"");
    }

    SolverConfig config;
    try {
        if (doc.contains("scorer")) {
            const nlohmann::json& s = doc.at("scorer");
            if (!s.is_object()) throw ParseError("scorer must be a JSON object");
            static const char* scorer_known[] = {"kind", "rollouts", "alpha", "sweeps",
                                                 "max_steps", "truncated_cost"};
            for (const auto& [key, value] : s.items()) {
                bool ok = false;
                for (const char* k : scorer_known) ok = ok || key == k;
                if (!ok) throw ParseError("unknown scorer field \"" + key + "\"");
            }
            if (s.contains("kind")) {
                std::string kind = s.at("kind").get<std::string>();
                if (kind == "monte_carlo") config.scorer.kind = ScorerKind::monte_carlo;
                else if (kind == "bootstrap") config.scorer.kind = ScorerKind::bootstrap;
                else if (kind == "exact") config.scorer.kind = ScorerKind::exact;
                else throw ParseError("unknown scorer kind \"" + kind + "\"");
            }
            if (s.contains("rollouts")) config.scorer.rollouts = s.at("rollouts").get<int>();
            if (s.contains("alpha")) config.scorer.alpha = s.at("alpha").get<double>();
            if (s.contains("sweeps")) config.scorer.sweeps = s.at("sweeps").get<int>();
            if (s.contains("max_steps")) config.scorer.max_steps = s.at("max_steps").get<int>();
            if (s.contains("truncated_cost"))
                config.scorer.truncated_cost = s.at("truncated_cost").get<bool>();
        }
        if (doc.contains("baseline_window"))
            config.baseline_window = doc.at("baseline_window").get<int>();
        if (doc.contains("budget")) config.budget = doc.at("budget").get<uint64_t>();
        if (doc.contains("epsilon")) config.epsilon = doc.at("epsilon").get<double>();
        if (doc.contains("seed")) config.seed = doc.at("seed").get<uint64_t>();
        if (doc.contains("weight_floor")) config.weight_floor = doc.at("weight_floor").get<double>();
        if (doc.contains("factor_cap")) config.factor_cap = doc.at("factor_cap").get<double>();
        if (doc.contains("greedy_eval_stride"))
            config.greedy_eval_stride = doc.at("greedy_eval_stride").get<int>();
        if (doc.contains("probe_steps")) config.probe_steps = doc.at("probe_steps").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed solver config: ") + e.what());
    }
    check_config(config);
    return config;
}

nlohmann::json solver_config_to_json(const SolverConfig& config) {
    const char* kind = "monte_carlo";
    if (config.scorer.kind == ScorerKind::bootstrap) kind = "bootstrap";
    else if (config.scorer.kind == ScorerKind::exact) kind = "exact";
    return nlohmann::json{
        {"scorer",
         {{"kind", kind},
          {"rollouts", config.scorer.rollouts},
          {"alpha", config.scorer.alpha},
          {"sweeps", config.scorer.sweeps},
          {"max_steps", config.scorer.max_steps},
          {"truncated_cost", config.scorer.truncated_cost}}},
        {"baseline_window", config.baseline_window},
        {"budget", config.budget},
        {"epsilon", config.epsilon},
        {"seed", config.seed},
        {"weight_floor", config.weight_floor},
        {"factor_cap", config.factor_cap},
        {"greedy_eval_stride", config.greedy_eval_stride},
        {"probe_steps", config.probe_steps}};
}

std::string trace_csv(const SolverTrace& trace) {
    std::string out = "iter,score,factor,drift\n";
    char line[160];
    for (const IterationRecord& r : trace.iterations) {
        std::snprintf(line, sizeof(line), "%llu,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(r.iter), r.score, r.factor, r.drift);
        out += line;
    }
    return out;
}

} // namespace sdmlab
