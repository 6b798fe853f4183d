#include "sdmlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <omp.h>

#include "sdmlab/error.hpp"

namespace sdmlab::kernels {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    return std::max(1, omp_get_max_threads());
}

// --- exact sweeps -----------------------------------------------------------

namespace {

void quality_range(SetEvaluator& ev, const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                   int split, int total, double* out_a, double* out_b, std::vector<int>& slots) {
    for (uint64_t i = begin; i < end; ++i) {
        indexer.decode(i, slots);
        out_a[i - begin] = ev.group_quality(0, split, slots);
        if (out_b) out_b[i - begin] = ev.group_quality(split, total, slots);
    }
}

} // namespace

void exact_quality_sweep_serial(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                                int split, double* out_a, double* out_b, const ExactOptions& opts) {
    SetEvaluator ev(mdps, space, opts);
    std::vector<int> slots;
    quality_range(ev, indexer, begin, end, split, static_cast<int>(mdps.size()), out_a, out_b,
                  slots);
}

void exact_quality_sweep_parallel(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                  const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                                  int split, double* out_a, double* out_b, const ExactOptions& opts,
                                  int threads) {
    SetEvaluator ev(mdps, space, opts);
    const int total = static_cast<int>(mdps.size());
    const int64_t n = static_cast<int64_t>(end - begin);
#pragma omp parallel num_threads(threads)
    {
        std::vector<int> slots;
#pragma omp for schedule(static)
        for (int64_t off = 0; off < n; ++off) {
            uint64_t i = begin + static_cast<uint64_t>(off);
            indexer.decode(i, slots);
            out_a[off] = ev.group_quality(0, split, slots);
            if (out_b) out_b[off] = ev.group_quality(split, total, slots);
        }
    }
}

void exact_quality_sweep(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                         const PolicyIndexer& indexer, uint64_t begin, uint64_t end, int split,
                         double* out_a, double* out_b, const ExactOptions& opts, int threads) {
    int t = resolve_threads(threads);
    if (t <= 1 || end - begin < 2)
        exact_quality_sweep_serial(mdps, space, indexer, begin, end, split, out_a, out_b, opts);
    else
        exact_quality_sweep_parallel(mdps, space, indexer, begin, end, split, out_a, out_b, opts,
                                     t);
}

namespace {

/// Set quality plus set-wide properness for one slot assignment.
double set_quality_proper(SetEvaluator& ev, int total, const std::vector<int>& slots,
                          bool* proper) {
    double q = 1.0;
    bool all = true;
    for (int m = 0; m < total; ++m) {
        QualityEstimate est = ev.evaluate_mdp(m, slots);
        q *= est.quality;
        all = all && est.proper;
        if (!est.proper) {
            q = 0.0;
            break;
        }
    }
    *proper = all;
    return q;
}

SweepExtremes extremes_range(SetEvaluator& ev, const PolicyIndexer& indexer, uint64_t begin,
                             uint64_t end, int total, std::vector<int>& slots) {
    SweepExtremes ext;
    ext.argmax_index = begin;
    for (uint64_t i = begin; i < end; ++i) {
        indexer.decode(i, slots);
        bool proper = false;
        double q = set_quality_proper(ev, total, slots, &proper);
        if (proper) ++ext.proper_count;
        if (q > 0.0) ++ext.positive_count;
        if (q > ext.max_quality) {
            ext.max_quality = q;
            ext.argmax_index = i;
        }
    }
    return ext;
}

} // namespace

SweepExtremes exact_extremes_sweep_serial(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                          const PolicyIndexer& indexer, uint64_t begin,
                                          uint64_t end, const ExactOptions& opts) {
    SetEvaluator ev(mdps, space, opts);
    std::vector<int> slots;
    return extremes_range(ev, indexer, begin, end, static_cast<int>(mdps.size()), slots);
}

SweepExtremes exact_extremes_sweep_parallel(const std::vector<CsspMdp>& mdps,
                                            const KeySpace& space, const PolicyIndexer& indexer,
                                            uint64_t begin, uint64_t end, const ExactOptions& opts,
                                            int threads) {
    SetEvaluator ev(mdps, space, opts);
    const int total = static_cast<int>(mdps.size());
    const uint64_t n = end - begin;
    const uint64_t chunks = std::min<uint64_t>(threads, std::max<uint64_t>(n, 1));
    std::vector<SweepExtremes> partial(chunks);
#pragma omp parallel num_threads(static_cast<int>(chunks))
    {
        std::vector<int> slots;
#pragma omp for schedule(static)
        for (int64_t c = 0; c < static_cast<int64_t>(chunks); ++c) {
            uint64_t lo = begin + n * c / chunks;
            uint64_t hi = begin + n * (c + 1) / chunks;
            partial[c] = extremes_range(ev, indexer, lo, hi, total, slots);
        }
    }
    // Chunks cover ascending index ranges, so merging in chunk order with a
    // strict comparison keeps the lowest argmax on ties.
    SweepExtremes ext;
    ext.argmax_index = begin;
    for (const SweepExtremes& p : partial) {
        ext.positive_count += p.positive_count;
        ext.proper_count += p.proper_count;
        if (p.max_quality > ext.max_quality) {
            ext.max_quality = p.max_quality;
            ext.argmax_index = p.argmax_index;
        }
    }
    return ext;
}

SweepExtremes exact_extremes_sweep(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                                   const PolicyIndexer& indexer, uint64_t begin, uint64_t end,
                                   const ExactOptions& opts, int threads) {
    int t = resolve_threads(threads);
    if (t <= 1 || end - begin < 2)
        return exact_extremes_sweep_serial(mdps, space, indexer, begin, end, opts);
    return exact_extremes_sweep_parallel(mdps, space, indexer, begin, end, opts, t);
}

// --- Monte Carlo sweeps -----------------------------------------------------

void rollout_batch(const CsspMdp& mdp, const KeySpace& space, int m, const std::vector<int>& slots,
                   int n, const SeedStream& base, int max_steps, double* total_costs,
                   double* constraint_totals, uint8_t* reached, int* steps) {
    const int k_dims = mdp.num_constraints;
    for (int t = 0; t < n; ++t) {
        SeedStream stream = base.child("traj", static_cast<uint64_t>(t));
        int s = mdp.initial_state;
        double cost = 0.0;
        double* dtot = constraint_totals + static_cast<size_t>(t) * k_dims;
        for (int k = 0; k < k_dims; ++k) dtot[k] = 0.0;
        int step = 0;
        while (s != mdp.goal_state && step < max_steps) {
            int key = space.key_of_state(m, s);
            int row = space.mdp_slot(m, key, slots[key]);
            const std::vector<Outcome>& outs = mdp.transitions[s][row];
            // One draw per step regardless of branching keeps the stream
            // advance schedule independent of the MDP's structure.
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
        total_costs[t] = cost;
        reached[t] = (s == mdp.goal_state) ? 1 : 0;
        steps[t] = step;
    }
}

QualityEstimate batch_quality(const CsspMdp& mdp, int n, const double* total_costs,
                              const double* constraint_totals, const uint8_t* reached,
                              const RolloutOptions& opts) {
    const int k_dims = mdp.num_constraints;
    bool all_reached = true;
    for (int t = 0; t < n; ++t) all_reached = all_reached && reached[t];

    QualityEstimate est;
    est.proper = all_reached;
    if (!all_reached && !opts.truncated_cost) {
        est.expected_total_cost = std::numeric_limits<double>::infinity();
        est.expected_constraint_costs.assign(k_dims,
                                             std::numeric_limits<double>::infinity());
        est.constraints_satisfied = false;
        est.quality = 0.0;
        return est;
    }

    double mean_cost = 0.0;
    est.expected_constraint_costs.assign(k_dims, 0.0);
    for (int t = 0; t < n; ++t) {
        mean_cost += total_costs[t];
        for (int k = 0; k < k_dims; ++k)
            est.expected_constraint_costs[k] += constraint_totals[static_cast<size_t>(t) * k_dims + k];
    }
    mean_cost /= n;
    for (double& d : est.expected_constraint_costs) d /= n;
    est.expected_total_cost = mean_cost;

    est.constraints_satisfied = true;
    for (int k = 0; k < k_dims; ++k)
        est.constraints_satisfied = est.constraints_satisfied &&
                                    est.expected_constraint_costs[k] <=
                                        mdp.constraint_values[k] + opts.constraint_tol;

    if (!est.constraints_satisfied)
        est.quality = 0.0;
    else if (mean_cost <= 1.0 / opts.quality_cap)
        est.quality = opts.quality_cap;
    else
        est.quality = 1.0 / mean_cost;
    return est;
}

namespace {

/// Per-thread buffers for one Monte Carlo sweep.
struct McScratch {
    std::vector<int> slots;
    std::vector<double> totals;
    std::vector<double> dtotals;
    std::vector<uint8_t> reached;
    std::vector<int> steps;
};

void mc_one_policy(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                   const PolicySource& source, const SeedStream& root, uint64_t ordinal,
                   int rollouts, int split, const std::vector<double>& scale,
                   const RolloutOptions& opts, McScratch& scratch, double* qa, double* qb) {
    SeedStream ps = root.child("policy", ordinal);
    if (source.explicit_slots) {
        double u = ps.next_double();
        double mass = 0.0;
        size_t idx = source.explicit_probs->size() - 1;
        for (size_t j = 0; j < source.explicit_probs->size(); ++j) {
            mass += (*source.explicit_probs)[j];
            if (u < mass) {
                idx = j;
                break;
            }
        }
        scratch.slots = (*source.explicit_slots)[idx];
    } else if (source.factorized) {
        sample_policy_slots(*source.factorized, ps, scratch.slots);
    } else {
        // Mirrors sample_policy_slots on unit weights draw for draw, so a
        // uniform factorized prior reproduces this source bit for bit.
        scratch.slots.resize(space.num_keys());
        for (int k = 0; k < space.num_keys(); ++k) {
            size_t count = space.key_actions(k).size();
            double u = ps.next_double() * static_cast<double>(count);
            double acc = 0.0;
            int pick = static_cast<int>(count) - 1;
            for (size_t j = 0; j < count; ++j) {
                acc += 1.0;
                if (u < acc) {
                    pick = static_cast<int>(j);
                    break;
                }
            }
            scratch.slots[k] = pick;
        }
    }

    double prod_a = 1.0, prod_b = 1.0;
    const int total = static_cast<int>(mdps.size());
    for (int m = 0; m < total; ++m) {
        uint64_t pos = (opts.paired_streams && m >= split) ? static_cast<uint64_t>(m - split)
                                                           : static_cast<uint64_t>(m);
        SeedStream rb = root.child("rollout", ordinal, pos);
        rollout_batch(mdps[m], space, m, scratch.slots, rollouts, rb, opts.max_steps,
                      scratch.totals.data(), scratch.dtotals.data(), scratch.reached.data(),
                      scratch.steps.data());
        QualityEstimate est = batch_quality(mdps[m], rollouts, scratch.totals.data(),
                                            scratch.dtotals.data(), scratch.reached.data(), opts);
        double q = est.quality / (scale.empty() ? 1.0 : scale[m]);
        if (m < split) prod_a *= q;
        else prod_b *= q;
    }
    *qa = prod_a;
    if (qb) *qb = prod_b;
}

McScratch make_scratch(const std::vector<CsspMdp>& mdps, int rollouts) {
    int max_k = 0;
    for (const CsspMdp& mdp : mdps) max_k = std::max(max_k, mdp.num_constraints);
    McScratch s;
    s.totals.resize(rollouts);
    s.dtotals.resize(static_cast<size_t>(rollouts) * std::max(max_k, 1));
    s.reached.resize(rollouts);
    s.steps.resize(rollouts);
    return s;
}

} // namespace

void mc_quality_sweep_serial(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                             const PolicySource& source, uint64_t count, int rollouts, int split,
                             const std::vector<double>& scale, uint64_t seed,
                             const RolloutOptions& opts, double* out_a, double* out_b) {
    SeedStream root(seed);
    McScratch scratch = make_scratch(mdps, rollouts);
    for (uint64_t i = 0; i < count; ++i)
        mc_one_policy(mdps, space, source, root, i, rollouts, split, scale, opts, scratch,
                      out_a + i, out_b ? out_b + i : nullptr);
}

void mc_quality_sweep_parallel(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                               const PolicySource& source, uint64_t count, int rollouts, int split,
                               const std::vector<double>& scale, uint64_t seed,
                               const RolloutOptions& opts, double* out_a, double* out_b,
                               int threads) {
    SeedStream root(seed);
#pragma omp parallel num_threads(threads)
    {
        McScratch scratch = make_scratch(mdps, rollouts);
#pragma omp for schedule(static)
        for (int64_t i = 0; i < static_cast<int64_t>(count); ++i)
            mc_one_policy(mdps, space, source, root, static_cast<uint64_t>(i), rollouts, split,
                          scale, opts, scratch, out_a + i, out_b ? out_b + i : nullptr);
    }
}

void mc_quality_sweep(const std::vector<CsspMdp>& mdps, const KeySpace& space,
                      const PolicySource& source, uint64_t count, int rollouts, int split,
                      const std::vector<double>& scale, uint64_t seed, const RolloutOptions& opts,
                      double* out_a, double* out_b, int threads) {
    int t = resolve_threads(threads);
    if (t <= 1 || count < 2)
        mc_quality_sweep_serial(mdps, space, source, count, rollouts, split, scale, seed, opts,
                                out_a, out_b);
    else
        mc_quality_sweep_parallel(mdps, space, source, count, rollouts, split, scale, seed, opts,
                                  out_a, out_b, t);
}

} // namespace sdmlab::kernels
