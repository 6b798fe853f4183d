#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "sdmlab/bundle.hpp"
#include "sdmlab/generators.hpp"

using namespace sdmlab;
using nlohmann::json;

namespace {

std::string cli() { return SDMLAB_CLI_PATH; }

std::string write_mdp(const std::string& dir, const std::string& name, const CsspMdp& mdp) {
    save_mdp(mdp, dir + "/" + name);
    return dir + "/" + name;
}

/// Bundle whose train and test sets are the same single MDP file.
std::string self_bundle(const std::string& dir, const std::string& mdp_name) {
    json doc{{"train", {mdp_name}}, {"test", {mdp_name}}};
    oracle::spit(dir + "/bundle.json", doc.dump(2) + "\n");
    return dir + "/bundle.json";
}

json report_of(const oracle::CliResult& r) {
    REQUIRE(r.exit_code == 0);
    return json::parse(r.out);
}

} // namespace

TEST_CASE("validate accepts a clean MDP file") {
    auto dir = oracle::scratch_dir("validate_ok");
    auto path = write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto r = oracle::run_cli(cli(), "validate " + path);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("ok: 4 states") != std::string::npos);
}

TEST_CASE("validate lists violations and exits with the domain code") {
    auto dir = oracle::scratch_dir("validate_bad");
    json doc = mdp_to_json(oracle::two_policy_chain());
    doc["transitions"][0]["next"][0][1] = 0.7;
    oracle::spit(dir + "/bad.json", doc.dump());
    auto r = oracle::run_cli(cli(), "validate " + dir + "/bad.json");
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("probability_mass") != std::string::npos);
    CHECK(r.out.find("0.700000") != std::string::npos);
}

TEST_CASE("malformed documents exit with the input code") {
    auto dir = oracle::scratch_dir("validate_malformed");
    oracle::spit(dir + "/broken.json", "{ this is not json");
    auto r = oracle::run_cli(cli(), "validate " + dir + "/broken.json");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error:") != std::string::npos);

    auto missing = oracle::run_cli(cli(), "validate " + dir + "/absent.json");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("usage errors exit with the input code") {
    CHECK(oracle::run_cli(cli(), "difficulty").exit_code == 2);
    CHECK(oracle::run_cli(cli(), "frobnicate x").exit_code == 2);
    CHECK(oracle::run_cli(cli(), "difficulty b.json --method telepathy").exit_code == 2);
}

TEST_CASE("the version flag reports the library version") {
    auto r = oracle::run_cli(cli(), "--version");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find(kLibraryVersion) != std::string::npos);
}

TEST_CASE("validate accepts a bundle and reports its digest") {
    auto dir = oracle::scratch_dir("bundle_ok");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto bundle = self_bundle(dir, "chain.json");
    auto r = oracle::run_cli(cli(), "validate " + bundle);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("bundle ok: 1 train, 1 test") != std::string::npos);
}

TEST_CASE("bundles must list one potential per MDP") {
    auto dir = oracle::scratch_dir("bundle_phi_mismatch");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    oracle::spit(dir + "/phi.json", json{{"values", {0.0, 0.0, 0.0, 0.0}}}.dump());
    json doc{{"train", {"chain.json"}}, {"train_potentials", {"phi.json", "phi.json"}}};
    oracle::spit(dir + "/bundle.json", doc.dump());
    auto r = oracle::run_cli(cli(), "validate " + dir + "/bundle.json");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("one potential per MDP") != std::string::npos);
}

TEST_CASE("unknown bundle fields are rejected") {
    auto dir = oracle::scratch_dir("bundle_unknown");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    json doc{{"train", {"chain.json"}}, {"tranq", 1}};
    oracle::spit(dir + "/bundle.json", doc.dump());
    auto r = oracle::run_cli(cli(), "validate " + dir + "/bundle.json");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("tranq") != std::string::npos);
}

TEST_CASE("encode, validate and difficulty chain into a pipeline") {
    auto dir = oracle::scratch_dir("pipeline");
    oracle::spit(dir + "/task.json", classical_to_json(oracle::line_with_detour_task()).dump(2));

    for (std::string mode : {"optimal", "satisficing", "agile"}) {
        auto enc = oracle::run_cli(cli(), "encode " + dir + "/task.json --mode " + mode +
                                              " --out " + dir + "/" + mode + ".json");
        REQUIRE(enc.exit_code == 0);
        auto val = oracle::run_cli(cli(), "validate " + dir + "/" + mode + ".json");
        CHECK(val.exit_code == 0);
    }

    // the encoded files carry the intended quality semantics
    auto policies = enumerate_policies({load_mdp(dir + "/satisficing.json")}, {});
    REQUIRE(policies.size() == 2);
    std::multiset<double> sat, opt, agile;
    for (const auto& p : policies) {
        sat.insert(exact_policy_evaluation(load_mdp(dir + "/satisficing.json"), p).quality);
        opt.insert(exact_policy_evaluation(load_mdp(dir + "/optimal.json"), p).quality);
        agile.insert(exact_policy_evaluation(load_mdp(dir + "/agile.json"), p).quality);
    }
    CHECK(*sat.begin() == doctest::Approx(1.0 / 3.0));
    CHECK(*sat.rbegin() == doctest::Approx(0.5));
    CHECK(*opt.begin() == 0.0);
    CHECK(*opt.rbegin() == doctest::Approx(0.5));
    CHECK(*agile.begin() == doctest::Approx(1.0));
    CHECK(*agile.rbegin() == doctest::Approx(1.0));

    auto bundle = self_bundle(dir, "satisficing.json");
    auto rep = report_of(oracle::run_cli(cli(), "difficulty " + bundle + " --method exact"));
    CHECK(rep["results"]["total"].get<double>() == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("exact difficulty of the two-policy chain bundle") {
    auto dir = oracle::scratch_dir("diff_exact");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto bundle = self_bundle(dir, "chain.json");
    auto rep = report_of(oracle::run_cli(cli(), "difficulty " + bundle + " --method exact"));
    CHECK(rep["command"] == "difficulty");
    CHECK(rep["version"] == kLibraryVersion);
    CHECK(rep["results"]["method"] == "exact");
    CHECK(rep["results"]["train_term"].get<double>() == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(rep["results"]["distance_term"].get<double>() == 0.0);
    CHECK(rep["results"]["total"].get<double>() == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(rep["results"]["degenerate"] == false);
    for (const auto& digest : rep["inputs"]) CHECK(digest.get<std::string>().size() == 16);
}

TEST_CASE("monte carlo difficulty pairs train and test streams") {
    auto dir = oracle::scratch_dir("diff_mc");
    write_mdp(dir, "coin.json", oracle::coin_flip_mdp(0.5));
    auto bundle = self_bundle(dir, "coin.json");
    auto rep = report_of(oracle::run_cli(
        cli(), "difficulty " + bundle + " --method mc --n 300 --rollouts 20 --seed 7"));
    CHECK(rep["results"]["method"] == "monte_carlo");
    CHECK(rep["results"]["sample_count"] == 300);
    CHECK(rep["results"]["distance_term"].get<double>() == 0.0);
    CHECK(rep["results"]["total"].get<double>() > 0.0);
    CHECK(rep["seed"] == 7);
}

TEST_CASE("canonical reports are byte-identical across runs and thread counts") {
    auto dir = oracle::scratch_dir("canonical");
    write_mdp(dir, "coin.json", oracle::coin_flip_mdp(0.5));
    auto bundle = self_bundle(dir, "coin.json");
    std::string args = "difficulty " + bundle + " --method mc --n 200 --rollouts 10 --seed 5 "
                       "--canonical";
    auto base = oracle::run_cli(cli(), args);
    REQUIRE(base.exit_code == 0);
    CHECK(base.out.find("timing") == std::string::npos);
    CHECK(base.out.find("wall_clock") == std::string::npos);

    CHECK(oracle::run_cli(cli(), args).out == base.out);
    CHECK(oracle::run_cli(cli(), args + " --threads 1").out == base.out);
    CHECK(oracle::run_cli(cli(), args + " --threads 4").out == base.out);
    CHECK(oracle::run_cli(cli(), args, "SDMLAB_THREADS=3").out == base.out);
}

TEST_CASE("a report's config echo reproduces the canonical payload") {
    auto dir = oracle::scratch_dir("report_echo");
    write_mdp(dir, "coin.json", oracle::coin_flip_mdp(0.5));
    auto bundle = self_bundle(dir, "coin.json");
    auto first = oracle::run_cli(
        cli(), "difficulty " + bundle + " --method mc --n 150 --rollouts 8 --seed 9 --canonical");
    auto rep = report_of(first);
    char args[256];
    std::snprintf(args, sizeof(args),
                  "difficulty %s --method %s --n %llu --rollouts %d --max-steps %d --seed %llu "
                  "--canonical",
                  bundle.c_str(), rep["config"]["method"].get<std::string>().c_str(),
                  static_cast<unsigned long long>(rep["config"]["n"].get<uint64_t>()),
                  rep["config"]["rollouts"].get<int>(), rep["config"]["max_steps"].get<int>(),
                  static_cast<unsigned long long>(rep["seed"].get<uint64_t>()));
    CHECK(oracle::run_cli(cli(), args).out == first.out);
}

TEST_CASE("solve is reproducible and writes the trace csv") {
    auto dir = oracle::scratch_dir("solve");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto bundle = self_bundle(dir, "chain.json");
    std::string args = "solve " + bundle + " --seed 12 --canonical --csv " + dir + "/trace.csv";
    auto first = oracle::run_cli(cli(), args);
    auto rep = report_of(first);
    CHECK(rep["results"]["trace"]["converged"] == true);
    CHECK(rep["results"]["final_quality"]["greedy"]["set_quality"].get<double>() ==
          doctest::Approx(0.5).epsilon(1e-9));

    auto csv = oracle::slurp(dir + "/trace.csv");
    CHECK(csv.rfind("iter,score,factor,drift\n", 0) == 0);

    CHECK(oracle::run_cli(cli(), args).out == first.out);
}

TEST_CASE("solve honors a config file and flags a zero budget") {
    auto dir = oracle::scratch_dir("solve_budget");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto bundle = self_bundle(dir, "chain.json");
    oracle::spit(dir + "/config.json", json{{"budget", 0}}.dump());
    auto rep = report_of(
        oracle::run_cli(cli(), "solve " + bundle + " --config " + dir + "/config.json"));
    CHECK(rep["results"]["trace"]["degenerate_budget"] == true);
    CHECK(rep["results"]["trace"]["iterations_run"] == 0);

    oracle::spit(dir + "/bad.json", json{{"budgets", 10}}.dump());
    auto bad = oracle::run_cli(cli(), "solve " + bundle + " --config " + dir + "/bad.json");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("a uniform prior is rated exactly as hard as the task's first term") {
    auto dir = oracle::scratch_dir("knowledge_prior");
    write_mdp(dir, "coin.json", oracle::coin_flip_mdp(0.5));
    auto bundle = self_bundle(dir, "coin.json");
    auto prior = report_of(oracle::run_cli(
        cli(), "knowledge " + bundle + " --prior uniform --n 400 --rollouts 30 --seed 11"));
    auto diff = report_of(oracle::run_cli(
        cli(), "difficulty " + bundle + " --method mc --n 400 --rollouts 30 --seed 11"));
    CHECK(prior["results"]["value"].get<double>() ==
          diff["results"]["train_term"].get<double>());
}

TEST_CASE("an exact scorer outranks a single-rollout monte carlo scorer") {
    // the train task must be stochastic, otherwise one rollout is already exact
    auto dir = oracle::scratch_dir("knowledge_scorer");
    write_mdp(dir, "coin.json", oracle::coin_flip_mdp(0.5));
    auto bundle = self_bundle(dir, "coin.json");
    auto exact = report_of(oracle::run_cli(
        cli(), "knowledge " + bundle + " --scorer exact --n 300 --seed 3"));
    auto mc = report_of(oracle::run_cli(
        cli(), "knowledge " + bundle + " --scorer mc:n=1 --n 300 --seed 3"));
    CHECK(exact["results"]["capped"] == true);
    CHECK(mc["results"]["capped"] == false);
    CHECK(exact["results"]["raw"].get<double>() > mc["results"]["raw"].get<double>());
}

TEST_CASE("an overlap similarity outranks a constant guess") {
    // monotone weighted grids tie structural overlap to quality proximity
    auto dir = oracle::scratch_dir("knowledge_simfn");
    auto grid = encode_classical(oracle::monotone_weighted_grid(3, 3, 91),
                                 EncodeMode::satisficing);
    write_mdp(dir, "grid.json", grid);
    auto bundle = self_bundle(dir, "grid.json");
    auto overlap = report_of(oracle::run_cli(
        cli(), "knowledge " + bundle + " --simfn overlap --n 300 --seed 23"));
    auto constant = report_of(oracle::run_cli(
        cli(), "knowledge " + bundle + " --simfn constant:0.5 --n 300 --seed 23"));
    CHECK(overlap["results"]["value"].get<double>() > constant["results"]["value"].get<double>());
}

TEST_CASE("knowledge requires exactly one element") {
    auto dir = oracle::scratch_dir("knowledge_usage");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto bundle = self_bundle(dir, "chain.json");
    auto none = oracle::run_cli(cli(), "knowledge " + bundle);
    CHECK(none.exit_code == 2);
    CHECK(none.err.find("exactly one") != std::string::npos);
    auto both = oracle::run_cli(
        cli(), "knowledge " + bundle + " --prior uniform --scorer exact");
    CHECK(both.exit_code == 2);
}

TEST_CASE("distance is zero on identical bundles and symmetric otherwise") {
    auto dir = oracle::scratch_dir("distance");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    auto slow = oracle::two_policy_chain();
    slow.transitions[0][0][0].cost = 4.0; // now the other plan is optimal
    write_mdp(dir, "slow.json", slow);
    json a{{"train", {"chain.json"}}};
    json b{{"train", {"slow.json"}}};
    oracle::spit(dir + "/a.json", a.dump());
    oracle::spit(dir + "/b.json", b.dump());

    auto same = report_of(
        oracle::run_cli(cli(), "distance " + dir + "/a.json " + dir + "/a.json"));
    CHECK(same["results"]["distance"].get<double>() == 0.0);

    auto ab = report_of(oracle::run_cli(cli(), "distance " + dir + "/a.json " + dir + "/b.json"));
    auto ba = report_of(oracle::run_cli(cli(), "distance " + dir + "/b.json " + dir + "/a.json"));
    CHECK(ab["results"]["distance"].get<double>() > 0.0);
    CHECK(ab["results"]["distance"].get<double>() ==
          doctest::Approx(ba["results"]["distance"].get<double>()).epsilon(1e-12));
}

TEST_CASE("bundles that disagree on shaping cannot be compared") {
    auto dir = oracle::scratch_dir("distance_shaped");
    write_mdp(dir, "chain.json", oracle::two_policy_chain());
    oracle::spit(dir + "/phi.json", json{{"values", {0.0, 0.0, 0.0, 0.0}}}.dump());
    oracle::spit(dir + "/a.json", json{{"train", {"chain.json"}}}.dump());
    oracle::spit(dir + "/b.json",
                 json{{"train", {"chain.json"}}, {"train_potentials", {"phi.json"}}}.dump());
    auto r = oracle::run_cli(cli(), "distance " + dir + "/a.json " + dir + "/b.json");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("shaping") != std::string::npos);
}

TEST_CASE("evaluate scores a stored policy against the test set") {
    auto dir = oracle::scratch_dir("evaluate");
    auto mdp = oracle::two_policy_chain();
    write_mdp(dir, "chain.json", mdp);
    auto bundle = self_bundle(dir, "chain.json");
    auto policies = enumerate_policies({mdp}, {});
    oracle::spit(dir + "/policy.json", policy_to_json(policies[0]).dump(2));
    auto rep = report_of(oracle::run_cli(
        cli(), "evaluate " + bundle + " --policy " + dir + "/policy.json --rollouts 10"));
    CHECK(rep["results"]["set_quality"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rep["results"]["per_mdp"][0]["proper"] == true);

    // a bundle without a test set has nothing to evaluate
    oracle::spit(dir + "/train_only.json", json{{"train", {"chain.json"}}}.dump());
    auto r = oracle::run_cli(cli(), "evaluate " + dir + "/train_only.json --policy " + dir +
                                        "/policy.json");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("no test set") != std::string::npos);
}
