#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "sdmlab/error.hpp"
#include "sdmlab/generators.hpp"
#include "sdmlab/policy.hpp"

using namespace sdmlab;

namespace {

/// Two-key test space: s0 picks between two actions, s1 between two actions.
CsspMdp two_by_two() {
    return oracle::build_mdp(3, 2,
                             {{0, 0, 1}, {0, 1, 1}, {1, 0, 2}, {1, 1, 2}},
                             0, 2);
}

} // namespace

TEST_CASE("context spec names parse and print") {
    auto spec = context_spec_from_names({"goal_state", "transition_id"});
    CHECK(spec.tags ==
          std::vector<ContextTag>{ContextTag::goal_state, ContextTag::transition_id});
    CHECK(context_spec_names(spec) == std::vector<std::string>{"goal_state", "transition_id"});
    CHECK_THROWS_AS(context_spec_from_names({"goal"}), Error);
    CHECK_THROWS_AS(context_spec_from_names({"goal_state", "goal_state"}), Error);
}

TEST_CASE("context tuples expose the tagged elements") {
    auto a = oracle::two_policy_chain();
    CHECK(context_of(a, {}).empty());

    auto spec = context_spec_from_names({"initial_state", "goal_state"});
    auto ctx = context_of(a, spec);
    REQUIRE(ctx.size() == 2);
    CHECK(ctx[0] == 0);
    CHECK(ctx[1] == 3);

    // structural digests: equal elements hash equal, a changed cost differs
    auto cost_spec = context_spec_from_names({"cost_id"});
    auto b = a;
    CHECK(context_of(a, cost_spec) == context_of(b, cost_spec));
    b.transitions[0][0][0].cost = 2.0;
    CHECK(context_of(a, cost_spec) != context_of(b, cost_spec));
    // the transition digest ignores costs
    auto trans_spec = context_spec_from_names({"transition_id"});
    CHECK(context_of(a, trans_spec) == context_of(b, trans_spec));
    b.transitions[0][0][0].next = 2;
    CHECK(context_of(a, trans_spec) != context_of(b, trans_spec));
}

TEST_CASE("key space covers reachable non-goal states") {
    auto mdp = oracle::two_policy_chain();
    KeySpace space({mdp}, {});
    CHECK(space.num_mdps() == 1);
    CHECK(space.num_keys() == 3); // states 0, 1, 2; the goal is excluded
    for (int k = 0; k < space.num_keys(); ++k) CHECK(space.key(k).state != mdp.goal_state);
    CHECK(space.key_of_state(0, mdp.goal_state) == -1);

    // an unreachable state contributes no key
    CsspMdp iso = oracle::build_mdp(4, 1, {{0, 0, 1}, {2, 0, 1}}, 0, 1);
    KeySpace iso_space({iso}, {});
    CHECK(iso_space.num_keys() == 1);
    CHECK(iso_space.key_of_state(0, 2) == -1);
}

TEST_CASE("mdps with equal context share keys through action intersection") {
    auto a = two_by_two();
    auto b = two_by_two();
    b.applicable[1] = {1};
    b.transitions[1] = {{{2, 1.0, 1.0, {}}}};

    // same (empty) context: keys are shared, s1 narrows to the common action
    KeySpace space({a, b}, {});
    CHECK(space.num_keys() == 2);
    int k1 = space.key_of_state(0, 1);
    CHECK(space.key_actions(k1) == std::vector<int>{1});

    // no common action anywhere at a shared key is unrepresentable
    auto c = two_by_two();
    c.applicable[0] = {1};
    c.transitions[0] = {{{1, 1.0, 1.0, {}}}};
    auto d = two_by_two();
    d.applicable[0] = {0};
    d.transitions[0] = {{{1, 1.0, 1.0, {}}}};
    CHECK_THROWS_WITH_AS((KeySpace{{c, d}, {}}),
                         doctest::Contains("no applicable action in common"), Error);
}

TEST_CASE("goal context separates otherwise identical mdps") {
    // same transition structure, different goals; with goal_state context the
    // key spaces are disjoint and the policy count is the product of both
    CsspMdp a = oracle::build_mdp(3, 2, {{0, 0, 1}, {0, 1, 2}, {1, 0, 2}}, 0, 2);
    CsspMdp b = oracle::build_mdp(3, 2, {{0, 0, 1}, {0, 1, 2}, {2, 0, 1}}, 0, 1);
    auto spec = context_spec_from_names({"goal_state"});
    KeySpace space({a, b}, spec);
    CHECK(space.num_keys() == 4); // {0,1} from a, {0,2} from b
    uint64_t count = 0;
    REQUIRE(space.policy_count(count));
    CHECK(count == 4); // (2*1) * (2*1), hand-counted
    auto policies = enumerate_policies({a, b}, spec);
    CHECK(policies.size() == 4);
}

TEST_CASE("enumerate_policies is the lexicographic product") {
    auto mdp = two_by_two();
    auto policies = enumerate_policies({mdp}, {});
    REQUIRE(policies.size() == 4);
    // last key varies fastest
    CHECK(policies[0].entries[0].second == 0);
    CHECK(policies[0].entries[1].second == 0);
    CHECK(policies[1].entries[0].second == 0);
    CHECK(policies[1].entries[1].second == 1);
    CHECK(policies[3].entries[0].second == 1);
    CHECK(policies[3].entries[1].second == 1);

    // single-action keys give exactly one policy
    auto line = encode_classical(oracle::line_task(), EncodeMode::satisficing);
    CHECK(enumerate_policies({line}, {}).size() == 1);
}

TEST_CASE("enumeration cap reports the exact count") {
    auto mdp = two_by_two();
    CHECK(enumerate_policies({mdp}, {}, 4).size() == 4); // cap is inclusive
    CHECK_THROWS_WITH_AS(enumerate_policies({mdp}, {}, 3), doctest::Contains("4"), Error);

    auto sparse = oracle::sparse_chain(6, 10);
    CHECK_THROWS_WITH_AS(enumerate_policies({sparse}, {}),
                         doctest::Contains("64000000"), Error);
}

TEST_CASE("policy indexer is a lexicographic bijection") {
    auto mdp = two_by_two();
    KeySpace space({mdp}, {});
    PolicyIndexer indexer(space);
    REQUIRE(indexer.countable());
    REQUIRE(indexer.count() == 4);
    auto policies = enumerate_policies({mdp}, {});
    std::vector<int> slots;
    for (uint64_t i = 0; i < indexer.count(); ++i) {
        indexer.decode(i, slots);
        CHECK(indexer.encode(slots) == i);
        CHECK(materialize_policy(space, slots) == policies[i]);
        CHECK(compile_policy(space, policies[i]) == slots);
    }
}

TEST_CASE("policy indexer counts the four-by-four grid space") {
    auto grid = encode_classical(make_grid_task(4, 4), EncodeMode::satisficing);
    KeySpace space({grid}, {});
    PolicyIndexer indexer(space);
    REQUIRE(indexer.countable());
    // 3 corners of 2 actions, 8 border cells of 3, 4 interior cells of 4
    CHECK(indexer.count() == 13'436'928ULL);
}

TEST_CASE("policy indexer detects unrepresentable counts") {
    auto grid = encode_classical(make_grid_task(8, 8), EncodeMode::satisficing);
    KeySpace space({grid}, {});
    PolicyIndexer indexer(space);
    CHECK(!indexer.countable());
    CHECK_THROWS_AS(indexer.count(), Error);
    uint64_t n = 0;
    CHECK(!space.policy_count(n));
}

TEST_CASE("point-mass sampling always returns the supported policy") {
    auto mdp = two_by_two();
    auto policies = enumerate_policies({mdp}, {});
    ExplicitDistribution point;
    point.support = std::make_shared<std::vector<DeterministicPolicy>>(
        std::vector<DeterministicPolicy>{policies[2]});
    point.prob = {1.0};
    SeedStream stream(99);
    for (int i = 0; i < 32; ++i) CHECK(sample_policy(point, stream) == policies[2]);
}

TEST_CASE("explicit sampling follows the masses") {
    auto mdp = two_by_two();
    auto policies = enumerate_policies({mdp}, {});
    ExplicitDistribution dist;
    dist.support = std::make_shared<std::vector<DeterministicPolicy>>(policies);
    dist.prob = {0.1, 0.2, 0.3, 0.4};
    SeedStream stream(4);
    const int n = 100'000;
    std::map<int, int> counts;
    for (int i = 0; i < n; ++i) {
        auto p = sample_policy(dist, stream);
        for (int j = 0; j < 4; ++j)
            if (p == policies[j]) ++counts[j];
    }
    double chi2 = 0.0;
    for (int j = 0; j < 4; ++j) {
        double expect = dist.prob[j] * n;
        chi2 += (counts[j] - expect) * (counts[j] - expect) / expect;
    }
    CHECK(chi2 < oracle::chi2_critical_001(3));
}

TEST_CASE("uniform factorized sampling is uniform over policies") {
    auto mdp = two_by_two();
    auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
    auto dist = uniform_factorized(space);
    auto policies = enumerate_policies({mdp}, {});
    SeedStream stream(5);
    const int n = 100'000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
        auto p = sample_policy(dist, stream);
        for (int j = 0; j < 4; ++j)
            if (p == policies[j]) ++counts[j];
    }
    double chi2 = 0.0;
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(counts[j] / double(n) - 0.25) < 0.01);
        chi2 += (counts[j] - n / 4.0) * (counts[j] - n / 4.0) / (n / 4.0);
    }
    CHECK(chi2 < oracle::chi2_critical_001(3));
}

TEST_CASE("factorized marginals converge to normalized weights") {
    auto mdp = two_by_two();
    auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
    auto dist = uniform_factorized(space);
    dist.weights[0] = {3.0, 1.0};
    SeedStream stream(6);
    const int n = 100'000;
    int heavy = 0;
    for (int i = 0; i < n; ++i) {
        auto p = sample_policy(dist, stream);
        if (p.entries[0].second == 0) ++heavy;
    }
    double chi2 = (heavy - 0.75 * n) * (heavy - 0.75 * n) / (0.75 * n) +
                  ((n - heavy) - 0.25 * n) * ((n - heavy) - 0.25 * n) / (0.25 * n);
    CHECK(chi2 < oracle::chi2_critical_001(1));
}

TEST_CASE("sampling is deterministic in the seed") {
    auto mdp = two_by_two();
    auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
    auto dist = uniform_factorized(space);
    SeedStream s1(42), s2(42), s3(43);
    bool diverged = false;
    for (int i = 0; i < 64; ++i) {
        auto a = sample_policy(dist, s1);
        CHECK(a == sample_policy(dist, s2));
        if (!(a == sample_policy(dist, s3))) diverged = true;
    }
    CHECK(diverged);
}

TEST_CASE("similarity counts agreeing keys") {
    auto grid = encode_classical(make_grid_task(3, 3), EncodeMode::satisficing);
    KeySpace space({grid}, {});
    PolicyIndexer indexer(space);
    std::vector<int> slots(space.num_keys(), 0);
    auto base = materialize_policy(space, slots);
    CHECK(similarity(base, base) == doctest::Approx(1.0));

    // flip one key at a time
    for (int k = 0; k < space.num_keys(); ++k) {
        auto flipped = slots;
        flipped[k] = 1;
        auto other = materialize_policy(space, flipped);
        CHECK(similarity(base, other) ==
              doctest::Approx((space.num_keys() - 1.0) / space.num_keys()));
        CHECK(similarity(other, base) == similarity(base, other));
    }

    // disagree on every key
    std::vector<int> all_one(space.num_keys(), 1);
    CHECK(similarity(base, materialize_policy(space, all_one)) == doctest::Approx(0.0));

    // random pairs stay within [0, 1] and symmetric
    SeedStream stream(77);
    auto u = uniform_factorized(std::make_shared<KeySpace>(space));
    for (int i = 0; i < 50; ++i) {
        auto a = sample_policy(u, stream);
        auto b = sample_policy(u, stream);
        double s = similarity(a, b);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(similarity(b, a) == doctest::Approx(s));
    }
}

TEST_CASE("similarity requires matching key sets") {
    auto a = oracle::two_policy_chain();
    auto b = two_by_two();
    auto pa = enumerate_policies({a}, {}).front();
    auto pb = enumerate_policies({b}, {}).front();
    CHECK_THROWS_AS(similarity(pa, pb), Error);
}

TEST_CASE("policy probability is the product of normalized weights") {
    auto mdp = two_by_two();
    auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
    auto policies = enumerate_policies({mdp}, {});

    auto uniform = uniform_factorized(space);
    for (const auto& p : policies) CHECK(policy_probability(uniform, p) == doctest::Approx(0.25));

    auto skew = uniform;
    skew.weights[0] = {3.0, 1.0};
    CHECK(policy_probability(skew, policies[0]) == doctest::Approx(0.375));
    CHECK(policy_probability(skew, policies[2]) == doctest::Approx(0.125));

    double total = 0.0;
    for (const auto& p : policies) total += policy_probability(skew, p);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("policy probabilities sum to one on random factorized instances") {
    RandomMdpConfig cfg;
    cfg.num_states = 5;
    cfg.max_branching = 3;
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> w(0.1, 5.0);
    for (uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        auto mdp = generate_random_mdp(cfg);
        auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
        auto dist = uniform_factorized(space);
        for (auto& row : dist.weights)
            for (auto& x : row) x = w(gen);
        double total = 0.0;
        for (const auto& p : enumerate_policies({mdp}, {}))
            total += policy_probability(dist, p);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("uniform_distribution spreads mass equally") {
    auto policies = enumerate_policies({two_by_two()}, {});
    auto u = uniform_distribution(policies);
    for (double p : u.prob) CHECK(p == doctest::Approx(0.25));

    auto point = uniform_distribution({policies[0]});
    CHECK(point.prob == std::vector<double>{1.0});

    CHECK_THROWS_AS(uniform_distribution({}), Error);

    std::vector<DeterministicPolicy> ten(10, policies[0]);
    auto d10 = uniform_distribution(ten);
    double sum = 0.0;
    for (double p : d10.prob) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("distribution validation enforces the invariants") {
    auto policies = enumerate_policies({two_by_two()}, {});
    auto dist = uniform_distribution(policies);
    validate(dist);
    dist.prob[0] = 0.5;
    CHECK_THROWS_AS(validate(dist), Error);
    dist.prob = {0.5, 0.75, -0.25, 0.0};
    CHECK_THROWS_AS(validate(dist), Error);

    auto mdp = two_by_two();
    auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
    auto fact = uniform_factorized(space);
    validate(fact);
    fact.weights[0][0] = 0.0;
    CHECK_THROWS_AS(validate(fact), Error);
    fact.weights[0][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate(fact), Error);
}

TEST_CASE("policy json round-trips under the bundle's context spec") {
    auto mdp = two_by_two();
    auto spec = context_spec_from_names({"goal_state"});
    auto policies = enumerate_policies({mdp}, spec);
    for (const auto& p : policies) {
        auto back = policy_from_json(policy_to_json(p), spec);
        CHECK(back == p);
    }
    CHECK_THROWS_AS(policy_from_json(nlohmann::json::array({1, 2}), spec), ParseError);
}

TEST_CASE("distribution json round-trips") {
    auto mdp = two_by_two();
    auto policies = enumerate_policies({mdp}, {});
    auto expl = uniform_distribution(policies);
    auto expl2 = explicit_from_json(explicit_to_json(expl), {});
    REQUIRE(expl2.support->size() == expl.support->size());
    CHECK(*expl2.support == *expl.support);
    CHECK(expl2.prob == expl.prob);

    auto space = std::make_shared<KeySpace>(std::vector<CsspMdp>{mdp}, ContextSpec{});
    auto fact = uniform_factorized(space);
    fact.weights[1] = {2.0, 0.5};
    auto fact2 = factorized_from_json(factorized_to_json(fact), {mdp}, {});
    CHECK(fact2.weights == fact.weights);

    // a document whose keys do not match the rebuilt space is rejected
    auto doc = factorized_to_json(fact);
    CHECK_THROWS_AS(factorized_from_json(doc, {oracle::two_policy_chain()}, {}), Error);
}
