#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sdmlab/error.hpp"
#include "sdmlab/generators.hpp"
#include "sdmlab/mc.hpp"

using namespace sdmlab;

namespace {

std::shared_ptr<KeySpace> space_of(const std::vector<CsspMdp>& mdps, const ContextSpec& spec) {
    return std::make_shared<KeySpace>(mdps, spec);
}

bool same_report(const DifficultyReport& a, const DifficultyReport& b) {
    return a.train_term == b.train_term && a.distance_term == b.distance_term &&
           a.total == b.total && a.degenerate == b.degenerate &&
           a.sample_count == b.sample_count && a.seed == b.seed;
}

} // namespace

TEST_CASE("deterministic rollouts reproduce the exact quality at any n") {
    auto line = encode_classical(oracle::line_task(), EncodeMode::satisficing);
    auto p = enumerate_policies({line}, {}).front();
    for (int n : {1, 3, 100}) {
        SeedStream stream(7);
        auto q = mc_policy_quality({line}, p, n, 32, stream);
        REQUIRE(q.per_mdp.size() == 1);
        CHECK(q.per_mdp[0].proper);
        CHECK(q.per_mdp[0].expected_total_cost == 2.0);
        CHECK(q.set_quality == 0.5);
    }
}

TEST_CASE("coin-flip quality converges to one half") {
    auto coin = oracle::coin_flip_mdp(0.5);
    auto p = enumerate_policies({coin}, {}).front();
    SeedStream stream(11);
    auto q = mc_policy_quality({coin}, p, 100'000, 4096, stream);
    CHECK(q.per_mdp[0].proper);
    CHECK(std::abs(q.set_quality - 0.5) < 0.02);
}

TEST_CASE("truncation below the plan length zeroes the quality") {
    auto line = encode_classical(oracle::line_task(), EncodeMode::satisficing);
    auto p = enumerate_policies({line}, {}).front();
    SeedStream stream(7);
    auto q = mc_policy_quality({line}, p, 10, 1, stream);
    CHECK(!q.per_mdp[0].proper);
    CHECK(q.set_quality == 0.0);
}

TEST_CASE("set quality multiplies across mdps") {
    auto sat = encode_classical(oracle::line_task(), EncodeMode::satisficing);
    auto agile = encode_classical(oracle::line_task(), EncodeMode::agile);
    auto p = enumerate_policies({sat, agile}, {}).front();
    SeedStream stream(3);
    auto q = mc_policy_quality({sat, agile}, p, 16, 32, stream);
    CHECK(q.per_mdp[0].quality == 0.5);
    CHECK(q.per_mdp[1].quality == 1.0);
    CHECK(q.set_quality == 0.5);
}

TEST_CASE("rollouts are deterministic in the stream") {
    auto coin = oracle::coin_flip_mdp(0.4);
    auto p = enumerate_policies({coin}, {}).front();
    SeedStream s1(21), s2(21), s3(22);
    auto a = mc_policy_quality({coin}, p, 500, 256, s1);
    auto b = mc_policy_quality({coin}, p, 500, 256, s2);
    auto c = mc_policy_quality({coin}, p, 500, 256, s3);
    CHECK(a.set_quality == b.set_quality);
    CHECK(a.set_quality != c.set_quality);
}

TEST_CASE("factorized rollouts draw a fresh policy per trajectory") {
    auto mdp = oracle::two_policy_chain();
    auto dist = uniform_factorized(space_of({mdp}, {}));
    SeedStream stream(5);
    auto q = mc_policy_quality({mdp}, dist, 4000, 32, stream);
    // a mean over cost-2 and cost-3 trajectories lands strictly between
    CHECK(q.per_mdp[0].expected_total_cost > 2.1);
    CHECK(q.per_mdp[0].expected_total_cost < 2.9);
}

TEST_CASE("difficulty at the uniform-quality point is exactly one") {
    auto agile = encode_classical(oracle::line_with_detour_task(), EncodeMode::agile);
    EstimatorConfig cfg;
    cfg.samples = 500;
    cfg.rollouts = 4;
    cfg.max_steps = 16;
    auto report = estimate_task_difficulty({agile}, {agile}, {}, cfg);
    CHECK(report.method == "monte_carlo");
    CHECK(report.train_term == 1.0);
    CHECK(report.distance_term == 0.0);
    CHECK(report.total == 1.0);
    CHECK(!report.degenerate);
}

TEST_CASE("paired streams collapse the distance term to zero") {
    RandomMdpConfig rc;
    rc.num_states = 6;
    rc.max_outcomes = 3;
    rc.seed = 40;
    auto mdp = generate_random_mdp(rc);
    EstimatorConfig cfg;
    cfg.samples = 300;
    cfg.rollouts = 10;
    auto report = estimate_task_difficulty({mdp}, {mdp}, {}, cfg);
    CHECK(report.distance_term == 0.0);
    CHECK(report.train_term >= 1.0);
}

TEST_CASE("sparse solvability trips the infinity sentinel") {
    auto sparse = oracle::sparse_chain(6, 10);
    EstimatorConfig cfg;
    cfg.samples = 1000;
    cfg.rollouts = 2;
    cfg.max_steps = 32;
    cfg.seed = 0;
    auto report = estimate_task_difficulty({sparse}, {sparse}, {}, cfg);
    CHECK(report.degenerate);
    CHECK(std::isinf(report.train_term));
    CHECK(std::isinf(report.total));
}

TEST_CASE("difficulty estimates rank the detour family correctly") {
    std::vector<double> exact_totals, mc_totals;
    for (int L : {3, 4, 6, 8, 12}) {
        auto mdp = oracle::detour_mdp(L);
        exact_totals.push_back(oracle::detour_difficulty(L));
        EstimatorConfig cfg;
        cfg.samples = 2000;
        cfg.rollouts = 20;
        cfg.max_steps = 64;
        cfg.seed = 9000 + L;
        mc_totals.push_back(estimate_task_difficulty({mdp}, {mdp}, {}, cfg).total);
    }
    CHECK(oracle::spearman(exact_totals, mc_totals) >= 0.9);
}

TEST_CASE("difficulty reports are deterministic and thread invariant") {
    RandomMdpConfig rc;
    rc.num_states = 5;
    rc.max_outcomes = 2;
    rc.seed = 41;
    auto mdp = generate_random_mdp(rc);
    EstimatorConfig cfg;
    cfg.samples = 200;
    cfg.rollouts = 8;
    cfg.seed = 77;
    cfg.threads = 1;
    auto base = estimate_task_difficulty({mdp}, {mdp}, {}, cfg);
    cfg.threads = 4;
    CHECK(same_report(estimate_task_difficulty({mdp}, {mdp}, {}, cfg), base));
    cfg.threads = 0;
    CHECK(same_report(estimate_task_difficulty({mdp}, {mdp}, {}, cfg), base));
    cfg.seed = 78;
    CHECK(!same_report(estimate_task_difficulty({mdp}, {mdp}, {}, cfg), base));
}

TEST_CASE("set distance separates flipped-optimum tasks") {
    auto a = encode_classical(oracle::line_with_detour_task(), EncodeMode::optimal);
    auto flipped_task = oracle::line_with_detour_task();
    flipped_task.edges[0].weight = 5.0;
    auto b = encode_classical(flipped_task, EncodeMode::optimal);

    EstimatorConfig cfg;
    cfg.samples = 400;
    cfg.rollouts = 4;
    cfg.max_steps = 16;
    CHECK(estimate_set_distance({a}, {a}, {}, cfg).distance_term == 0.0);

    // rescaled qualities are complementary indicators, every gap is 1
    auto d = estimate_set_distance({a}, {b}, {}, cfg);
    CHECK(d.distance_term == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.train_term == 0.0);
}

TEST_CASE("a point-mass prior on the optimum scores difficulty one") {
    auto mdp = oracle::two_policy_chain();
    auto policies = enumerate_policies({mdp}, {});
    // policies[0] takes action 0 at state 0: the 2-step plan
    ExplicitDistribution prior;
    prior.support = std::make_shared<std::vector<DeterministicPolicy>>(
        std::vector<DeterministicPolicy>{policies[0]});
    prior.prob = {1.0};
    EstimatorConfig cfg;
    cfg.samples = 200;
    cfg.rollouts = 4;
    auto d = estimate_prior_difficulty({mdp}, prior, {}, cfg);
    CHECK(!d.degenerate);
    CHECK(d.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a uniform prior reproduces the first difficulty term exactly") {
    auto mdp = oracle::two_policy_chain();
    EstimatorConfig cfg;
    cfg.samples = 500;
    cfg.rollouts = 6;
    cfg.seed = 13;
    auto report = estimate_task_difficulty({mdp}, {mdp}, {}, cfg);
    auto prior = uniform_factorized(space_of({mdp}, {}));
    auto d = estimate_prior_difficulty({mdp}, prior, {}, cfg);
    CHECK(d.value == report.train_term); // bit-identical, same sample stream
}

TEST_CASE("an improper-concentrated prior is degenerate") {
    CsspMdp mdp = oracle::build_mdp(2, 2, {{0, 0, 1}, {0, 1, 0}}, 0, 1);
    auto policies = enumerate_policies({mdp}, {});
    ExplicitDistribution prior;
    prior.support = std::make_shared<std::vector<DeterministicPolicy>>(
        std::vector<DeterministicPolicy>{policies[1]}); // the self-loop policy
    prior.prob = {1.0};
    EstimatorConfig cfg;
    cfg.samples = 100;
    cfg.rollouts = 2;
    cfg.max_steps = 16;
    auto d = estimate_prior_difficulty({mdp}, prior, {}, cfg);
    CHECK(d.degenerate);
    CHECK(std::isinf(d.value));
}

TEST_CASE("factorized priors must cover the task's key space") {
    auto mdp = oracle::two_policy_chain();
    auto other = uniform_factorized(space_of({oracle::coin_flip_mdp()}, {}));
    EstimatorConfig cfg;
    cfg.samples = 10;
    CHECK_THROWS_WITH_AS(estimate_prior_difficulty({mdp}, other, {}, cfg),
                         doctest::Contains("different key space"), Error);
}

TEST_CASE("priors weighted toward quality reduce estimated difficulty") {
    auto mdp = oracle::two_policy_chain();
    for (uint64_t seed = 0; seed < 5; ++seed) {
        EstimatorConfig cfg;
        cfg.samples = 400;
        cfg.rollouts = 4;
        cfg.seed = seed;
        auto flat = uniform_factorized(space_of({mdp}, {}));
        auto tilted = flat;
        tilted.weights[0] = {4.0, 1.0}; // action 0 is the 2-step plan
        double d_flat = estimate_prior_difficulty({mdp}, flat, {}, cfg).value;
        double d_tilted = estimate_prior_difficulty({mdp}, tilted, {}, cfg).value;
        CHECK(d_tilted <= d_flat);
    }
}

TEST_CASE("an exact scorer saturates the knowledge cap") {
    auto mdp = oracle::two_policy_chain();
    EstimatorConfig cfg;
    cfg.samples = 200;
    cfg.rollouts = 4;
    auto r = estimate_q_score({mdp}, make_exact_scorer({mdp}), {}, cfg);
    CHECK(r.capped);
    CHECK(r.pairs_used == 200);
    CHECK(r.pairs_skipped == 0);
    CHECK(r.mean_scorer_seconds > 0.0);
    CHECK(r.per_second > 0.0);
}

TEST_CASE("a constant scorer reduces to the quality-gap inverse") {
    // rescaled qualities are 1 and 2/3; a differing pair deviates by
    // (1/3)/(5/3) = 0.2, an equal pair by 0, so the raw value sits near
    // 1/(0.5 * 0.2) = 10
    auto mdp = oracle::two_policy_chain();
    ScoringFunction constant{"constant", [](const DeterministicPolicy&, SeedStream&) {
        return 0.7;
    }};
    EstimatorConfig cfg;
    cfg.samples = 2000;
    cfg.rollouts = 4;
    cfg.seed = 3;
    auto r = estimate_q_score({mdp}, constant, {}, cfg);
    CHECK(!r.capped);
    CHECK(r.raw > 8.0);
    CHECK(r.raw < 12.5);
}

TEST_CASE("scorer noise strictly degrades the knowledge score") {
    auto mdp = oracle::two_policy_chain();
    EstimatorConfig cfg;
    cfg.samples = 2000;
    cfg.rollouts = 4;
    cfg.seed = 19;
    double q0 = estimate_q_score({mdp}, make_noisy_scorer({mdp}, 0.0), {}, cfg).raw;
    double q1 = estimate_q_score({mdp}, make_noisy_scorer({mdp}, 0.1), {}, cfg).raw;
    double q5 = estimate_q_score({mdp}, make_noisy_scorer({mdp}, 0.5), {}, cfg).raw;
    CHECK(q0 > q1);
    CHECK(q1 > q5);
}

TEST_CASE("zero-denominator pairs are skipped and counted") {
    // one of the two policies has quality zero, so roughly a quarter of the
    // sampled pairs put no mass in the reference denominator
    auto mdp = encode_classical(oracle::line_with_detour_task(), EncodeMode::optimal);
    EstimatorConfig cfg;
    cfg.samples = 400;
    cfg.rollouts = 4;
    auto r = estimate_q_score({mdp}, make_exact_scorer({mdp}), {}, cfg);
    CHECK(r.pairs_skipped > 50);
    CHECK(r.pairs_used + r.pairs_skipped == 400);
}

TEST_CASE("uniform-quality tasks make any unit similarity exact") {
    auto agile = encode_classical(oracle::line_with_detour_task(), EncodeMode::agile);
    EstimatorConfig cfg;
    cfg.samples = 300;
    cfg.rollouts = 4;
    auto r = estimate_q_sim({agile}, make_constant_similarity(1.0), {}, cfg);
    CHECK(r.capped); // every pair deviates by |0 - 0| = 0
}

TEST_CASE("an oracle-informed similarity saturates the cap") {
    auto mdp = oracle::two_policy_chain();
    double scale = normalize_quality_scale(mdp);
    SimilarityFunction informed{
        "informed", [mdp, scale](const DeterministicPolicy& a, const DeterministicPolicy& b) {
            double qa = exact_policy_evaluation(mdp, a).quality / scale;
            double qb = exact_policy_evaluation(mdp, b).quality / scale;
            return 1.0 - std::abs(qa - qb);
        }};
    EstimatorConfig cfg;
    cfg.samples = 300;
    cfg.rollouts = 4;
    auto r = estimate_q_sim({mdp}, informed, {}, cfg);
    CHECK(r.capped);
}

TEST_CASE("element overlap beats a constant similarity on the grid") {
    // monotone weighted grids tie structural overlap to quality proximity;
    // with cycling moves most pairs are improper ties and a constant wins
    auto grid = encode_classical(oracle::monotone_weighted_grid(3, 3, 91),
                                 EncodeMode::satisficing);
    EstimatorConfig cfg;
    cfg.samples = 500;
    cfg.rollouts = 8;
    cfg.max_steps = 64;
    cfg.seed = 23;
    auto overlap = estimate_q_sim({grid}, make_overlap_similarity(), {}, cfg);
    auto constant = estimate_q_sim({grid}, make_constant_similarity(0.5), {}, cfg);
    CHECK(!overlap.capped);
    CHECK(overlap.value > constant.value);
}

TEST_CASE("final-policy evaluation mirrors the rollout quality") {
    auto line = encode_classical(oracle::line_task(), EncodeMode::satisficing);
    auto agile = encode_classical(oracle::line_task(), EncodeMode::agile);
    auto p = enumerate_policies({line}, {}).front();
    auto one = evaluate_final_policy({line}, p, 8, 32, 5);
    CHECK(one.set_quality == 0.5);

    auto two = evaluate_final_policy({line, agile}, p, 8, 32, 5);
    CHECK(two.per_mdp[0].quality == 0.5);
    CHECK(two.per_mdp[1].quality == 1.0);
    CHECK(two.set_quality == 0.5);
}

TEST_CASE("constraint violations zero the final quality") {
    auto mdp = encode_classical(oracle::line_with_detour_task(), EncodeMode::optimal);
    auto policies = enumerate_policies({mdp}, {});
    int zeroed = 0;
    for (const auto& p : policies) {
        auto r = evaluate_final_policy({mdp}, p, 8, 32, 5);
        if (r.set_quality == 0.0) {
            CHECK(!r.per_mdp[0].constraints_satisfied);
            ++zeroed;
        }
    }
    CHECK(zeroed == 1);
}

TEST_CASE("distribution-valued final evaluation is deterministic") {
    auto mdp = oracle::two_policy_chain();
    auto dist = uniform_factorized(space_of({mdp}, {}));
    auto a = evaluate_final_policy({mdp}, dist, 200, 32, 31);
    auto b = evaluate_final_policy({mdp}, dist, 200, 32, 31);
    auto c = evaluate_final_policy({mdp}, dist, 200, 32, 32);
    CHECK(a.set_quality == b.set_quality);
    CHECK(a.set_quality != c.set_quality);
    // the mixture's mean cost sits between the two plan costs
    CHECK(a.per_mdp[0].expected_total_cost > 2.0);
    CHECK(a.per_mdp[0].expected_total_cost < 3.0);
}
