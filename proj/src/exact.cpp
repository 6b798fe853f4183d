#include "sdmlab/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <Eigen/Dense>

#include "sdmlab/error.hpp"
#include "sdmlab/kernels.hpp"

namespace sdmlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QualityEstimate improper_result(int k) {
    QualityEstimate est;
    est.proper = false;
    est.expected_total_cost = kInf;
    est.expected_constraint_costs.assign(k, kInf);
    est.constraints_satisfied = false;
    est.quality = 0.0;
    return est;
}

double quality_from(double cost, const std::vector<double>& dcosts, const CsspMdp& mdp,
                    const ExactOptions& opts, bool* satisfied_out) {
    bool satisfied = true;
    for (int k = 0; k < mdp.num_constraints; ++k)
        satisfied = satisfied && dcosts[k] <= mdp.constraint_values[k] + opts.constraint_tol;
    *satisfied_out = satisfied;
    if (!satisfied) return 0.0;
    if (cost <= 1.0 / opts.quality_cap) return opts.quality_cap;
    return 1.0 / cost;
}

// Scratch shared across evaluations of one thread. Sized lazily per MDP.
struct ChainScratch {
    std::vector<int> stack;
    std::vector<int> nodes;    // solve-system states in ascending order
    std::vector<char> forward; // policy-reachable flags
    std::vector<char> toward;  // can-reach-goal flags
    std::vector<int> index_of; // state -> row in the solve system, -1 outside
    std::vector<char> visited; // deterministic fast path
    Eigen::MatrixXd a;
    Eigen::MatrixXd rhs;
};

/**
 * Absorbing-chain evaluation of the policy fixed by row_of: state -> slot in
 * applicable[s]. The callback is invoked only for states the policy can
 * touch. This is the single implementation behind both the public
 * per-policy operation and the enumeration-scale evaluator.
 */
template <class RowOf>
QualityEstimate evaluate_chain(const CsspMdp& mdp, bool is_deterministic, RowOf&& row_of,
                               const ExactOptions& opts, ChainScratch& scratch) {
    const int k_dims = mdp.num_constraints;

    if (mdp.initial_state == mdp.goal_state) {
        QualityEstimate est;
        est.proper = true;
        est.expected_total_cost = 0.0;
        est.expected_constraint_costs.assign(k_dims, 0.0);
        est.quality = quality_from(0.0, est.expected_constraint_costs, mdp, opts,
                                   &est.constraints_satisfied);
        return est;
    }

    if (is_deterministic) {
        // Trajectory following with cycle detection; a revisited state means
        // the walk loops forever and the policy is improper.
        scratch.visited.assign(mdp.num_states, 0);
        QualityEstimate est;
        est.expected_constraint_costs.assign(k_dims, 0.0);
        int s = mdp.initial_state;
        double cost = 0.0;
        while (s != mdp.goal_state) {
            if (scratch.visited[s]) return improper_result(k_dims);
            scratch.visited[s] = 1;
            const Outcome& o = mdp.transitions[s][row_of(s)].front();
            cost += o.cost;
            for (int k = 0; k < k_dims; ++k)
                est.expected_constraint_costs[k] += o.constraint_costs[k];
            s = o.next;
        }
        est.proper = true;
        est.expected_total_cost = cost;
        est.quality =
            quality_from(cost, est.expected_constraint_costs, mdp, opts, &est.constraints_satisfied);
        return est;
    }

    // Forward reachability under the induced chain.
    scratch.forward.assign(mdp.num_states, 0);
    scratch.stack.clear();
    scratch.stack.push_back(mdp.initial_state);
    scratch.forward[mdp.initial_state] = 1;
    while (!scratch.stack.empty()) {
        int s = scratch.stack.back();
        scratch.stack.pop_back();
        if (s == mdp.goal_state) continue;
        for (const Outcome& o : mdp.transitions[s][row_of(s)])
            if (o.prob > 0.0 && !scratch.forward[o.next]) {
                scratch.forward[o.next] = 1;
                scratch.stack.push_back(o.next);
            }
    }
    if (!scratch.forward[mdp.goal_state]) return improper_result(k_dims);

    // Backward pass: which forward-reachable states can still reach the goal.
    // The rest absorb into goalless recurrent classes and stay out of the
    // linear systems (they would make I - Q singular).
    scratch.toward.assign(mdp.num_states, 0);
    scratch.toward[mdp.goal_state] = 1;
    bool grew = true;
    while (grew) {
        grew = false;
        for (int s = 0; s < mdp.num_states; ++s) {
            if (!scratch.forward[s] || scratch.toward[s] || s == mdp.goal_state) continue;
            for (const Outcome& o : mdp.transitions[s][row_of(s)])
                if (o.prob > 0.0 && scratch.toward[o.next]) {
                    scratch.toward[s] = 1;
                    grew = true;
                    break;
                }
        }
    }
    if (!scratch.toward[mdp.initial_state]) return improper_result(k_dims);

    scratch.nodes.clear();
    scratch.index_of.assign(mdp.num_states, -1);
    for (int s = 0; s < mdp.num_states; ++s)
        if (scratch.forward[s] && scratch.toward[s] && s != mdp.goal_state) {
            scratch.index_of[s] = static_cast<int>(scratch.nodes.size());
            scratch.nodes.push_back(s);
        }
    const int n = static_cast<int>(scratch.nodes.size());

    // Absorption probabilities: (I - Q) a = P(step hits goal).
    scratch.a.setZero(n, n);
    scratch.rhs.setZero(n, 1);
    for (int i = 0; i < n; ++i) {
        int s = scratch.nodes[i];
        scratch.a(i, i) = 1.0;
        for (const Outcome& o : mdp.transitions[s][row_of(s)]) {
            if (o.next == mdp.goal_state) scratch.rhs(i, 0) += o.prob;
            else if (scratch.index_of[o.next] >= 0) scratch.a(i, scratch.index_of[o.next]) -= o.prob;
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(scratch.a);
    Eigen::VectorXd absorb = lu.solve(scratch.rhs.col(0));
    if (!absorb.allFinite())
        throw Error("absorption linear solve produced non-finite values");

    if (absorb(scratch.index_of[mdp.initial_state]) < 1.0 - opts.properness_tol)
        return improper_result(k_dims);

    // Cost systems, restricted to the near-certainly absorbed states. Under
    // the properness tolerance the excluded states carry at most
    // tolerance-level visit probability.
    std::vector<int> keep;
    std::vector<int> sys_index(mdp.num_states, -1);
    for (int i = 0; i < n; ++i)
        if (absorb(i) >= 1.0 - opts.properness_tol) {
            sys_index[scratch.nodes[i]] = static_cast<int>(keep.size());
            keep.push_back(scratch.nodes[i]);
        }
    const int ne = static_cast<int>(keep.size());
    scratch.a.setZero(ne, ne);
    scratch.rhs.setZero(ne, 1 + k_dims);
    for (int i = 0; i < ne; ++i) {
        int s = keep[i];
        scratch.a(i, i) = 1.0;
        for (const Outcome& o : mdp.transitions[s][row_of(s)]) {
            scratch.rhs(i, 0) += o.prob * o.cost;
            for (int k = 0; k < k_dims; ++k)
                scratch.rhs(i, 1 + k) += o.prob * o.constraint_costs[k];
            if (o.next != mdp.goal_state && sys_index[o.next] >= 0)
                scratch.a(i, sys_index[o.next]) -= o.prob;
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu2(scratch.a);
    Eigen::MatrixXd x = lu2.solve(scratch.rhs);
    if (!x.allFinite()) throw Error("expected-cost linear solve produced non-finite values");

    QualityEstimate est;
    est.proper = true;
    int i0 = sys_index[mdp.initial_state];
    est.expected_total_cost = x(i0, 0);
    est.expected_constraint_costs.resize(k_dims);
    for (int k = 0; k < k_dims; ++k) est.expected_constraint_costs[k] = x(i0, 1 + k);
    est.quality = quality_from(est.expected_total_cost, est.expected_constraint_costs, mdp, opts,
                               &est.constraints_satisfied);
    return est;
}

} // namespace

QualityEstimate exact_policy_evaluation(const CsspMdp& mdp, const DeterministicPolicy& policy,
                                        const ExactOptions& opts) {
    std::vector<uint64_t> ctx = context_of(mdp, policy.context);
    // Rows are resolved lazily: the walk only ever asks about states the
    // policy can reach, so extra policy entries (other MDPs' keys) are fine.
    std::vector<int> row_cache(mdp.num_states, -2);
    InputKey probe{ctx, 0};
    auto row_of = [&](int s) {
        int& row = row_cache[s];
        if (row == -2) {
            probe.state = s;
            int action = policy.action_at(probe);
            row = mdp.slot_of(s, action);
            if (row < 0)
                throw Error("policy picks action " + std::to_string(action) +
                            " which is not applicable in state " + std::to_string(s));
        }
        return row;
    };
    ChainScratch scratch;
    return evaluate_chain(mdp, mdp.deterministic(), row_of, opts, scratch);
}

double quality_on_set(const std::vector<CsspMdp>& mdps, const DeterministicPolicy& policy,
                      const ExactOptions& opts) {
    double q = 1.0;
    for (const CsspMdp& mdp : mdps) {
        q *= exact_policy_evaluation(mdp, policy, opts).quality;
        if (q == 0.0) break;
    }
    return q;
}

// --- SetEvaluator -----------------------------------------------------------

SetEvaluator::SetEvaluator(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                           const ExactOptions& opts)
    : mdps_(mdps), space_(space), opts_(opts) {
    if (static_cast<int>(mdps.size()) != space.num_mdps())
        throw Error("evaluator MDP list does not match the key space");
    for (const CsspMdp& mdp : mdps) is_deterministic_.push_back(mdp.deterministic() ? 1 : 0);
}

QualityEstimate SetEvaluator::evaluate_mdp(int m, const std::vector<int>& slots) {
    const CsspMdp& mdp = mdps_[m];
    thread_local ChainScratch scratch;
    auto row_of = [&](int s) {
        int k = space_.key_of_state(m, s);
        return space_.mdp_slot(m, k, slots[k]);
    };
    return evaluate_chain(mdp, is_deterministic_[m] != 0, row_of, opts_, scratch);
}

double SetEvaluator::group_quality(int first, int last, const std::vector<int>& slots) {
    double q = 1.0;
    for (int m = first; m < last; ++m) {
        q *= evaluate_mdp(m, slots).quality;
        if (q == 0.0) break;
    }
    return q;
}

double SetEvaluator::set_quality(const std::vector<int>& slots) {
    return group_quality(0, static_cast<int>(mdps_.size()), slots);
}

// --- distributions over enumerated spaces -----------------------------------

ExplicitDistribution solution_distribution(const std::vector<CsspMdp>& mdps,
                                           const ContextSpec& spec, const ExactOptions& opts) {
    KeySpace space(mdps, spec);
    PolicyIndexer indexer(space);
    if (!indexer.countable() || indexer.count() > opts.enumeration_cap)
        throw Error("policy space exceeds the enumeration cap of " +
                    std::to_string(opts.enumeration_cap) + "; the exact route is unavailable");
    uint64_t n = indexer.count();

    std::vector<double> mass(n);
    kernels::exact_quality_sweep(mdps, space, indexer, 0, n, static_cast<int>(mdps.size()),
                                 mass.data(), nullptr, opts, opts.threads);
    double z = 0.0;
    for (double q : mass) z += q;
    if (!(z > 0.0))
        throw Error("no policy attains positive quality; the solution distribution is undefined");

    std::vector<DeterministicPolicy> support;
    support.reserve(n);
    std::vector<int> slots;
    for (uint64_t i = 0; i < n; ++i) {
        indexer.decode(i, slots);
        support.push_back(materialize_policy(space, slots));
    }
    ExplicitDistribution dist;
    dist.support = std::make_shared<const std::vector<DeterministicPolicy>>(std::move(support));
    dist.prob.resize(n);
    for (uint64_t i = 0; i < n; ++i) dist.prob[i] = mass[i] / z;
    return dist;
}

namespace {

void require_same_support(const ExplicitDistribution& p, const ExplicitDistribution& q) {
    if (p.support == q.support) return;
    if (!p.support || !q.support || p.support->size() != q.support->size() ||
        *p.support != *q.support)
        throw Error("distributions are over different supports");
}

} // namespace

double total_variation(const ExplicitDistribution& p, const ExplicitDistribution& q) {
    require_same_support(p, q);
    double sum = 0.0;
    for (size_t i = 0; i < p.prob.size(); ++i) sum += std::abs(p.prob[i] - q.prob[i]);
    return 0.5 * sum;
}

double shannon_entropy(const ExplicitDistribution& p) {
    double h = 0.0;
    for (double x : p.prob)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

ExplicitDistribution temper_distribution(const ExplicitDistribution& p, double beta) {
    if (!(beta >= 0.0)) throw Error("temper exponent must be nonnegative");
    ExplicitDistribution out;
    out.support = p.support;
    out.prob.resize(p.prob.size());
    if (beta == 0.0) {
        // The limit distribution is uniform over the support.
        double u = 1.0 / static_cast<double>(p.prob.size());
        for (double& x : out.prob) x = u;
        return out;
    }
    double z = 0.0;
    for (size_t i = 0; i < p.prob.size(); ++i) {
        out.prob[i] = p.prob[i] > 0.0 ? std::pow(p.prob[i], beta) : 0.0;
        z += out.prob[i];
    }
    if (!(z > 0.0)) throw Error("tempering produced an all-zero distribution");
    for (double& x : out.prob) x /= z;
    return out;
}

// --- difficulty -------------------------------------------------------------

namespace {

struct SweepMasses {
    std::vector<double> a, b;
    uint64_t count = 0;
};

SweepMasses exact_sweep_masses(const std::vector<CsspMdp>& first,
                               const std::vector<CsspMdp>& second, const ContextSpec& spec,
                               const ExactOptions& opts) {
    std::vector<CsspMdp> all = first;
    all.insert(all.end(), second.begin(), second.end());
    KeySpace space(all, spec);
    PolicyIndexer indexer(space);
    if (!indexer.countable() || indexer.count() > opts.enumeration_cap)
        throw Error("policy space exceeds the enumeration cap of " +
                    std::to_string(opts.enumeration_cap) +
                    "; use the Monte Carlo estimator instead");
    SweepMasses out;
    out.count = indexer.count();
    out.a.resize(out.count);
    out.b.resize(out.count);
    kernels::exact_quality_sweep(all, space, indexer, 0, out.count,
                                 static_cast<int>(first.size()), out.a.data(), out.b.data(), opts,
                                 opts.threads);
    return out;
}

void normalize_or_throw(std::vector<double>& mass, const char* which) {
    double z = 0.0;
    for (double q : mass) z += q;
    if (!(z > 0.0))
        throw Error(std::string("no policy attains positive quality on the ") + which +
                    " set; the solution distribution is undefined");
    for (double& q : mass) q /= z;
}

} // namespace

DifficultyReport exact_task_difficulty(const std::vector<CsspMdp>& train,
                                       const std::vector<CsspMdp>& test, const ContextSpec& spec,
                                       const ExactOptions& opts) {
    if (train.empty()) throw Error("difficulty needs a nonempty train set");
    SweepMasses masses = exact_sweep_masses(train, test, spec, opts);
    normalize_or_throw(masses.a, "train");
    normalize_or_throw(masses.b, "test");

    double uniform = 1.0 / static_cast<double>(masses.count);
    double tv_u = 0.0, tv_gap = 0.0;
    for (uint64_t i = 0; i < masses.count; ++i) {
        tv_u += std::abs(uniform - masses.a[i]);
        tv_gap += std::abs(masses.a[i] - masses.b[i]);
    }

    DifficultyReport report;
    report.method = "exact";
    report.sample_count = masses.count;
    report.train_term = 0.5 * tv_u;
    report.distance_term = 0.5 * tv_gap;
    report.total = report.train_term + report.distance_term;
    return report;
}

double exact_set_distance(const std::vector<CsspMdp>& a, const std::vector<CsspMdp>& b,
                          const ContextSpec& spec, const ExactOptions& opts) {
    if (a.empty() || b.empty()) throw Error("set distance needs two nonempty MDP sets");
    SweepMasses masses = exact_sweep_masses(a, b, spec, opts);
    normalize_or_throw(masses.a, "first");
    normalize_or_throw(masses.b, "second");
    double tv = 0.0;
    for (uint64_t i = 0; i < masses.count; ++i) tv += std::abs(masses.a[i] - masses.b[i]);
    return 0.5 * tv;
}

// --- maximum quality --------------------------------------------------------

namespace {

/// Largest state set in which a proper policy exists from every member:
/// every kept non-goal state has an action whose outcomes all stay in the
/// set, and can reach the goal through such actions. Returns a mask.
std::vector<char> proper_subgraph(const CsspMdp& mdp) {
    std::vector<char> in(mdp.num_states, 1);
    bool changed = true;
    while (changed) {
        changed = false;
        // Drop states with no action that stays inside.
        for (int s = 0; s < mdp.num_states; ++s) {
            if (!in[s] || s == mdp.goal_state) continue;
            bool has_valid = false;
            for (const auto& row : mdp.transitions[s]) {
                bool inside = true;
                for (const Outcome& o : row) inside = inside && (o.prob <= 0.0 || in[o.next]);
                if (inside) {
                    has_valid = true;
                    break;
                }
            }
            if (!has_valid) {
                in[s] = 0;
                changed = true;
            }
        }
        // Drop states that cannot reach the goal through inside actions.
        std::vector<char> toward(mdp.num_states, 0);
        toward[mdp.goal_state] = in[mdp.goal_state];
        bool grew = true;
        while (grew) {
            grew = false;
            for (int s = 0; s < mdp.num_states; ++s) {
                if (!in[s] || toward[s] || s == mdp.goal_state) continue;
                for (const auto& row : mdp.transitions[s]) {
                    bool inside = true;
                    bool hits = false;
                    for (const Outcome& o : row) {
                        if (o.prob <= 0.0) continue;
                        inside = inside && in[o.next];
                        hits = hits || toward[o.next];
                    }
                    if (inside && hits) {
                        toward[s] = 1;
                        grew = true;
                        break;
                    }
                }
            }
        }
        for (int s = 0; s < mdp.num_states; ++s)
            if (in[s] && !toward[s] && s != mdp.goal_state) {
                in[s] = 0;
                changed = true;
            }
    }
    return in;
}

} // namespace

double normalize_quality_scale(const CsspMdp& mdp, const ExactOptions& opts) {
    ContextSpec no_context;
    std::vector<CsspMdp> single{mdp};
    KeySpace space(single, no_context);
    PolicyIndexer indexer(space);

    if (indexer.countable() && indexer.count() <= opts.enumeration_cap) {
        kernels::SweepExtremes ext = kernels::exact_extremes_sweep(
            single, space, indexer, 0, indexer.count(), opts, opts.threads);
        if (ext.positive_count == 0)
            throw Error("no policy attains positive quality; the maximum quality is undefined");
        return ext.max_quality;
    }

    // Value-iteration route on the proper subgraph. Zero-cost traps outside
    // the subgraph would otherwise look optimal; zero-cost plateaus inside it
    // are broken by pessimistic initialization plus the hop tie-break.
    std::vector<char> in = proper_subgraph(mdp);
    if (!in[mdp.initial_state]) throw Error("no proper policy exists");

    const int g = mdp.goal_state;
    auto row_valid = [&](int s, size_t j) {
        for (const Outcome& o : mdp.transitions[s][j])
            if (o.prob > 0.0 && !in[o.next]) return false;
        return true;
    };

    // Hop distance to goal through valid actions (optimistic best case).
    std::vector<int> hops(mdp.num_states, std::numeric_limits<int>::max());
    hops[g] = 0;
    bool grew = true;
    while (grew) {
        grew = false;
        for (int s = 0; s < mdp.num_states; ++s) {
            if (!in[s] || s == g) continue;
            for (size_t j = 0; j < mdp.transitions[s].size(); ++j) {
                if (!row_valid(s, j)) continue;
                for (const Outcome& o : mdp.transitions[s][j])
                    if (o.prob > 0.0 && hops[o.next] != std::numeric_limits<int>::max() &&
                        hops[o.next] + 1 < hops[s]) {
                        hops[s] = hops[o.next] + 1;
                        grew = true;
                    }
            }
        }
    }

    auto hop_score = [&](int s, size_t j) {
        double e = 0.0;
        for (const Outcome& o : mdp.transitions[s][j])
            if (o.prob > 0.0) e += o.prob * static_cast<double>(hops[o.next]);
        return e;
    };

    // Upper-bound initialization: exact cost of the hop-descending policy,
    // solved over the whole subgraph so every kept state has a finite start.
    std::vector<int> init_row(mdp.num_states, -1);
    std::vector<int> nodes;
    std::vector<int> sys(mdp.num_states, -1);
    for (int s = 0; s < mdp.num_states; ++s) {
        if (!in[s] || s == g) continue;
        double best = kInf;
        for (size_t j = 0; j < mdp.transitions[s].size(); ++j) {
            if (!row_valid(s, j)) continue;
            double e = hop_score(s, j);
            if (e < best) {
                best = e;
                init_row[s] = static_cast<int>(j);
            }
        }
        sys[s] = static_cast<int>(nodes.size());
        nodes.push_back(s);
    }
    const int n = static_cast<int>(nodes.size());
    std::vector<double> value(mdp.num_states, 0.0);
    if (n > 0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            int s = nodes[i];
            a(i, i) = 1.0;
            for (const Outcome& o : mdp.transitions[s][init_row[s]]) {
                c(i) += o.prob * o.cost;
                if (o.next != g) a(i, sys[o.next]) -= o.prob;
            }
        }
        Eigen::VectorXd x = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(c);
        if (!x.allFinite()) throw Error("hop-policy linear solve produced non-finite values");
        for (int i = 0; i < n; ++i) value[nodes[i]] = x(i);
    }

    // Bellman sweeps, monotonically decreasing from the upper bound.
    int iter = 0;
    for (; iter < opts.vi_max_iters; ++iter) {
        double delta = 0.0;
        for (int i = 0; i < n; ++i) {
            int s = nodes[i];
            double best = kInf;
            for (size_t j = 0; j < mdp.transitions[s].size(); ++j) {
                if (!row_valid(s, j)) continue;
                double e = 0.0;
                for (const Outcome& o : mdp.transitions[s][j])
                    e += o.prob * (o.cost + (o.next == g ? 0.0 : value[o.next]));
                best = std::min(best, e);
            }
            delta = std::max(delta, std::abs(value[s] - best));
            value[s] = best;
        }
        if (delta < opts.vi_tol) break;
    }
    if (iter >= opts.vi_max_iters)
        throw Error("value iteration did not converge within the iteration cap");

    // Greedy extraction; value ties resolve toward fewer expected hops so
    // zero-cost plateaus still drain into the goal.
    DeterministicPolicy greedy;
    greedy.context = no_context;
    for (int s : reachable_states(mdp)) {
        if (s == g) continue;
        int pick = 0;
        if (in[s]) {
            double best_v = kInf, best_h = kInf;
            int best_j = -1;
            for (size_t j = 0; j < mdp.transitions[s].size(); ++j) {
                if (!row_valid(s, j)) continue;
                double e = 0.0;
                for (const Outcome& o : mdp.transitions[s][j])
                    e += o.prob * (o.cost + (o.next == g ? 0.0 : value[o.next]));
                double h = hop_score(s, j);
                double tie = opts.vi_tol * (1.0 + std::abs(best_v));
                if (best_j < 0 || e < best_v - tie || (std::abs(e - best_v) <= tie && h < best_h)) {
                    best_v = std::min(e, best_v);
                    best_h = h;
                    best_j = static_cast<int>(j);
                }
            }
            pick = best_j;
        }
        // States outside the subgraph are unreachable under the greedy
        // policy; any applicable action completes the key cover.
        greedy.entries.push_back({InputKey{{}, s}, mdp.applicable[s][pick]});
    }
    std::sort(greedy.entries.begin(), greedy.entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    QualityEstimate est = exact_policy_evaluation(mdp, greedy, opts);
    if (!est.proper)
        throw Error("value iteration produced an improper greedy policy; "
                    "the maximum quality is not certifiable");
    if (!est.constraints_satisfied)
        throw Error("greedy policy violates a constraint; the maximum quality is not "
                    "certifiable without enumeration");
    return est.quality;
}

} // namespace sdmlab
