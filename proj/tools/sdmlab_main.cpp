// Command-line surface over the sdmlab library. Reports go to standard
// output, diagnostics to standard error. Exit codes: 0 clean, 1 domain
// error, 2 input error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "sdmlab/bundle.hpp"
#include "sdmlab/error.hpp"
#include "sdmlab/generators.hpp"

namespace {

using namespace sdmlab;

nlohmann::json parse_document(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void emit_report(const std::string& command, const nlohmann::json& config_echo, uint64_t seed,
                 const std::vector<std::string>& inputs, nlohmann::json results,
                 double wall_seconds, bool canonical) {
    nlohmann::json report =
        make_run_report(command, config_echo, seed, inputs, std::move(results), wall_seconds);
    if (canonical) report = canonical_json(report);
    std::cout << dump_report(report);
}

std::vector<std::string> bundle_inputs(const TaskBundle& bundle) {
    std::vector<std::string> inputs = bundle.train_digests;
    inputs.insert(inputs.end(), bundle.test_digests.begin(), bundle.test_digests.end());
    return inputs;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Scorer spec strings: "exact", "mc:n=<rollouts>", "noisy:sigma=<s>".
ScoringFunction parse_scorer(const std::string& spec, const std::vector<CsspMdp>& train,
                             int max_steps) {
    if (spec == "exact") return make_exact_scorer(train);
    if (spec.rfind("mc:n=", 0) == 0) {
        int n = 0;
        try {
            n = std::stoi(spec.substr(5));
        } catch (const std::exception&) {
            throw ParseError("bad scorer spec \"" + spec + "\"");
        }
        if (n < 1) throw ParseError("scorer rollout count must be at least 1");
        return make_mc_scorer(train, n, max_steps);
    }
    if (spec.rfind("noisy:sigma=", 0) == 0) {
        double sigma = 0.0;
        try {
            sigma = std::stod(spec.substr(12));
        } catch (const std::exception&) {
            throw ParseError("bad scorer spec \"" + spec + "\"");
        }
        if (!(sigma >= 0.0)) throw ParseError("scorer noise must be nonnegative");
        return make_noisy_scorer(train, sigma);
    }
    throw ParseError("unknown scorer \"" + spec + "\" (expected exact, mc:n=N or noisy:sigma=S)");
}

/// Similarity spec strings: "overlap", "constant:<value>".
SimilarityFunction parse_simfn(const std::string& spec) {
    if (spec == "overlap") return make_overlap_similarity();
    if (spec.rfind("constant:", 0) == 0) {
        double value = 0.0;
        try {
            value = std::stod(spec.substr(9));
        } catch (const std::exception&) {
            throw ParseError("bad similarity spec \"" + spec + "\"");
        }
        if (value < 0.0 || value > 1.0)
            throw ParseError("constant similarity must lie in [0, 1]");
        return make_constant_similarity(value);
    }
    throw ParseError("unknown similarity \"" + spec + "\" (expected overlap or constant:C)");
}

int cmd_validate(const std::string& path) {
    nlohmann::json doc = parse_document(path);
    if (doc.is_object() && doc.contains("train")) {
        TaskBundle bundle = load_bundle(path);
        std::cout << "bundle ok: " << bundle.train.size() << " train, " << bundle.test.size()
                  << " test MDP(s), digest " << bundle.digest << "\n";
        return 0;
    }
    CsspMdp mdp = mdp_from_json(doc);
    std::vector<Violation> violations = validate_mdp(mdp);
    if (violations.empty()) {
        std::cout << "ok: " << mdp.num_states << " states, " << mdp.num_actions << " actions\n";
        return 0;
    }
    for (const Violation& v : violations) std::cout << v.code << ": " << v.message << "\n";
    return 1;
}

struct CommonFlags {
    uint64_t seed = 0;
    int threads = 0;
    bool canonical = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--seed", flags.seed, "Root seed for all derived streams");
    cmd->add_option("--threads", flags.threads, "Worker thread cap (0 = all)")
        ->envname("SDMLAB_THREADS");
    cmd->add_flag("--canonical", flags.canonical,
                  "Strip non-canonical (timing) fields from the report");
}

EstimatorConfig estimator_config(const TaskBundle& bundle, const CommonFlags& flags,
                                 uint64_t samples, int rollouts, int max_steps) {
    EstimatorConfig config;
    config.samples = samples;
    config.rollouts = rollouts;
    config.max_steps = max_steps;
    config.seed = flags.seed;
    config.rescale = bundle.rescale;
    config.truncated_cost = bundle.shaped;
    config.threads = flags.threads;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic task difficulty, distances and the general solver loop "
                 "for cost-constrained stochastic shortest-path MDPs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kLibraryVersion);

    // validate
    std::string validate_path;
    int validate_threads = 0;
    CLI::App* validate = app.add_subcommand("validate", "Check an MDP or bundle file");
    validate->add_option("path", validate_path, "MDP or bundle JSON file")->required();
    // Validation is single-pass; the cap is accepted so every subcommand
    // shares the same flag surface.
    validate->add_option("--threads", validate_threads, "Worker thread cap (0 = all)")
        ->envname("SDMLAB_THREADS");

    // difficulty
    std::string diff_bundle, diff_method = "exact";
    uint64_t diff_n = 10'000;
    int diff_rollouts = 100, diff_max_steps = 256;
    CommonFlags diff_flags;
    CLI::App* difficulty = app.add_subcommand("difficulty", "Task difficulty of a bundle");
    difficulty->add_option("bundle", diff_bundle, "Task bundle JSON file")->required();
    difficulty->add_option("--method", diff_method, "exact or mc")
        ->check(CLI::IsMember({"exact", "mc"}));
    difficulty->add_option("--n", diff_n, "Monte Carlo policy samples");
    difficulty->add_option("--rollouts", diff_rollouts, "Rollouts per sampled policy");
    difficulty->add_option("--max-steps", diff_max_steps, "Rollout step cap");
    add_common(difficulty, diff_flags);

    // distance
    std::string dist_a, dist_b, dist_method = "exact";
    uint64_t dist_n = 10'000;
    int dist_rollouts = 100, dist_max_steps = 256;
    CommonFlags dist_flags;
    CLI::App* distance = app.add_subcommand("distance", "Distance between two bundles' train sets");
    distance->add_option("bundle_a", dist_a, "First task bundle")->required();
    distance->add_option("bundle_b", dist_b, "Second task bundle")->required();
    distance->add_option("--method", dist_method, "exact or mc")
        ->check(CLI::IsMember({"exact", "mc"}));
    distance->add_option("--n", dist_n, "Monte Carlo policy samples");
    distance->add_option("--rollouts", dist_rollouts, "Rollouts per sampled policy");
    distance->add_option("--max-steps", dist_max_steps, "Rollout step cap");
    add_common(distance, dist_flags);

    // solve
    std::string solve_bundle, solve_config_path, solve_prior, solve_csv;
    int solve_probe = -1, solve_eval_rollouts = 100;
    CommonFlags solve_flags;
    CLI::App* solve = app.add_subcommand("solve", "Run the general solver loop on a bundle");
    solve->add_option("bundle", solve_bundle, "Task bundle JSON file")->required();
    solve->add_option("--config", solve_config_path, "Solver config JSON file");
    solve->add_option("--prior", solve_prior, "Factorized prior file (default uniform)");
    solve->add_option("--probe", solve_probe, "Online probe steps (overrides config)");
    solve->add_option("--csv", solve_csv, "Write the iteration trace CSV here");
    solve->add_option("--eval-rollouts", solve_eval_rollouts, "Test-set evaluation rollouts");
    add_common(solve, solve_flags);

    // knowledge
    std::string know_bundle, know_prior, know_scorer, know_simfn;
    uint64_t know_n = 1'000;
    int know_rollouts = 100, know_max_steps = 256;
    CommonFlags know_flags;
    CLI::App* knowledge =
        app.add_subcommand("knowledge", "Knowledge carried by a prior, scorer or similarity");
    knowledge->add_option("bundle", know_bundle, "Task bundle JSON file")->required();
    knowledge->add_option("--prior", know_prior,
                          "Prior to rate: \"uniform\" or a factorized-distribution file");
    knowledge->add_option("--scorer", know_scorer, "Scorer to rate: exact, mc:n=N, noisy:sigma=S");
    knowledge->add_option("--simfn", know_simfn, "Similarity to rate: overlap, constant:C");
    knowledge->add_option("--n", know_n, "Sampled policies (or pairs)");
    knowledge->add_option("--rollouts", know_rollouts, "Rollouts per sampled policy");
    knowledge->add_option("--max-steps", know_max_steps, "Rollout step cap");
    add_common(knowledge, know_flags);

    // encode
    std::string enc_in, enc_out, enc_mode = "optimal";
    double enc_optimal_cost = -1.0;
    CLI::App* encode = app.add_subcommand("encode", "Encode a classical task as a CSSP MDP");
    encode->add_option("task", enc_in, "Classical task JSON file")->required();
    encode->add_option("--mode", enc_mode, "optimal, satisficing or agile")
        ->check(CLI::IsMember({"optimal", "satisficing", "agile"}));
    encode->add_option("--out", enc_out, "Output MDP file")->required();
    encode->add_option("--optimal-cost", enc_optimal_cost,
                       "Known optimal plan cost (computed when omitted)");

    // evaluate
    std::string eval_bundle, eval_policy;
    int eval_rollouts = 100, eval_max_steps = 256;
    CommonFlags eval_flags;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Final quality of a policy on a test set");
    evaluate->add_option("bundle", eval_bundle, "Task bundle JSON file")->required();
    evaluate->add_option("--policy", eval_policy, "Policy JSON file")->required();
    evaluate->add_option("--rollouts", eval_rollouts, "Rollouts per test MDP");
    evaluate->add_option("--max-steps", eval_max_steps, "Rollout step cap");
    add_common(evaluate, eval_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        auto start = std::chrono::steady_clock::now();

        if (*validate) return cmd_validate(validate_path);

        if (*difficulty) {
            TaskBundle bundle = load_bundle(diff_bundle);
            nlohmann::json results;
            if (diff_method == "exact") {
                ExactOptions opts;
                opts.threads = diff_flags.threads;
                results = difficulty_to_json(
                    exact_task_difficulty(bundle.train, bundle.test, bundle.context, opts));
            } else {
                EstimatorConfig config = estimator_config(bundle, diff_flags, diff_n,
                                                          diff_rollouts, diff_max_steps);
                results = difficulty_to_json(
                    estimate_task_difficulty(bundle.train, bundle.test, bundle.context, config));
            }
            nlohmann::json echo{{"method", diff_method},
                                {"n", diff_n},
                                {"rollouts", diff_rollouts},
                                {"max_steps", diff_max_steps},
                                {"rescale", bundle.rescale},
                                {"context", context_spec_names(bundle.context)}};
            emit_report("difficulty", echo, diff_flags.seed, bundle_inputs(bundle),
                        std::move(results), elapsed_since(start), diff_flags.canonical);
            return 0;
        }

        if (*distance) {
            TaskBundle a = load_bundle(dist_a);
            TaskBundle b = load_bundle(dist_b);
            if (a.shaped != b.shaped)
                throw Error("the two bundles disagree on cost shaping; distances would not "
                            "be comparable");
            nlohmann::json results;
            if (dist_method == "exact") {
                ExactOptions opts;
                opts.threads = dist_flags.threads;
                results = {{"distance", exact_set_distance(a.train, b.train, a.context, opts)},
                           {"method", "exact"}};
            } else {
                EstimatorConfig config =
                    estimator_config(a, dist_flags, dist_n, dist_rollouts, dist_max_steps);
                config.truncated_cost = a.shaped || b.shaped;
                results =
                    difficulty_to_json(estimate_set_distance(a.train, b.train, a.context, config));
            }
            std::vector<std::string> inputs = a.train_digests;
            inputs.insert(inputs.end(), b.train_digests.begin(), b.train_digests.end());
            nlohmann::json echo{{"method", dist_method},
                                {"n", dist_n},
                                {"rollouts", dist_rollouts},
                                {"max_steps", dist_max_steps},
                                {"context", context_spec_names(a.context)}};
            emit_report("distance", echo, dist_flags.seed, inputs, std::move(results),
                        elapsed_since(start), dist_flags.canonical);
            return 0;
        }

        if (*solve) {
            TaskBundle bundle = load_bundle(solve_bundle);
            SolverConfig config;
            if (!solve_config_path.empty())
                config = solver_config_from_json(parse_document(solve_config_path));
            if (solve->count("--seed") > 0) config.seed = solve_flags.seed;
            if (solve_probe >= 0) config.probe_steps = solve_probe;
            config.threads = solve_flags.threads;
            config.scorer.truncated_cost = config.scorer.truncated_cost || bundle.shaped;
            if (!solve_prior.empty() && solve_prior != "uniform")
                config.prior = factorized_from_json(parse_document(solve_prior), bundle.train,
                                                    bundle.context);

            SolverTrace trace = run_general_sdm(bundle.train, bundle.context, config);
            if (!solve_csv.empty()) {
                std::ofstream out(solve_csv);
                if (!out) throw Error("cannot write " + solve_csv);
                out << trace_csv(trace);
            }

            nlohmann::json results{{"trace", trace_to_json(trace)}};
            if (!bundle.test.empty()) {
                RolloutOptions opts;
                opts.max_steps = config.scorer.max_steps;
                opts.truncated_cost = bundle.shaped;
                results["final_quality"] = {
                    {"greedy", final_quality_to_json(evaluate_final_policy(
                                   bundle.test, trace.greedy, solve_eval_rollouts,
                                   config.scorer.max_steps, config.seed, opts))},
                    {"estimate", final_quality_to_json(evaluate_final_policy(
                                     bundle.test, trace.final_estimate, solve_eval_rollouts,
                                     config.scorer.max_steps, config.seed, opts))}};
            }
            emit_report("solve", solver_config_to_json(config), config.seed,
                        bundle_inputs(bundle), std::move(results), elapsed_since(start),
                        solve_flags.canonical);
            return 0;
        }

        if (*knowledge) {
            int selected = (know_prior.empty() ? 0 : 1) + (know_scorer.empty() ? 0 : 1) +
                           (know_simfn.empty() ? 0 : 1);
            if (selected != 1)
                throw ParseError("select exactly one of --prior, --scorer, --simfn");
            TaskBundle bundle = load_bundle(know_bundle);
            EstimatorConfig config =
                estimator_config(bundle, know_flags, know_n, know_rollouts, know_max_steps);

            nlohmann::json results;
            nlohmann::json echo{{"n", know_n},
                                {"rollouts", know_rollouts},
                                {"max_steps", know_max_steps},
                                {"rescale", bundle.rescale},
                                {"context", context_spec_names(bundle.context)}};
            if (!know_prior.empty()) {
                echo["element"] = "prior";
                echo["prior"] = know_prior;
                PriorDifficulty result;
                if (know_prior == "uniform") {
                    auto space = std::make_shared<const KeySpace>(bundle.train, bundle.context);
                    result = estimate_prior_difficulty(bundle.train, uniform_factorized(space),
                                                       bundle.context, config);
                } else {
                    FactorizedDistribution prior = factorized_from_json(
                        parse_document(know_prior), bundle.train, bundle.context);
                    result = estimate_prior_difficulty(bundle.train, prior, bundle.context, config);
                }
                results = prior_difficulty_to_json(result);
            } else if (!know_scorer.empty()) {
                echo["element"] = "scorer";
                echo["scorer"] = know_scorer;
                ScoringFunction scorer = parse_scorer(know_scorer, bundle.train, know_max_steps);
                results = q_score_to_json(
                    estimate_q_score(bundle.train, scorer, bundle.context, config));
            } else {
                echo["element"] = "simfn";
                echo["simfn"] = know_simfn;
                SimilarityFunction simfn = parse_simfn(know_simfn);
                results =
                    q_sim_to_json(estimate_q_sim(bundle.train, simfn, bundle.context, config));
            }
            emit_report("knowledge", echo, know_flags.seed, bundle_inputs(bundle),
                        std::move(results), elapsed_since(start), know_flags.canonical);
            return 0;
        }

        if (*encode) {
            ClassicalTask task = classical_from_json(parse_document(enc_in));
            EncodeMode mode = EncodeMode::optimal;
            if (enc_mode == "satisficing") mode = EncodeMode::satisficing;
            else if (enc_mode == "agile") mode = EncodeMode::agile;
            std::optional<double> v1;
            if (encode->count("--optimal-cost") > 0) v1 = enc_optimal_cost;
            CsspMdp mdp = encode_classical(task, mode, v1);
            save_mdp(mdp, enc_out);
            std::cerr << "wrote " << enc_out << "\n";
            return 0;
        }

        if (*evaluate) {
            TaskBundle bundle = load_bundle(eval_bundle);
            if (bundle.test.empty()) throw Error("bundle has no test set to evaluate against");
            DeterministicPolicy policy =
                policy_from_json(parse_document(eval_policy), bundle.context);
            RolloutOptions opts;
            opts.max_steps = eval_max_steps;
            opts.truncated_cost = bundle.shaped;
            FinalQuality result = evaluate_final_policy(bundle.test, policy, eval_rollouts,
                                                        eval_max_steps, eval_flags.seed, opts);
            nlohmann::json echo{{"policy", eval_policy},
                                {"rollouts", eval_rollouts},
                                {"max_steps", eval_max_steps}};
            emit_report("evaluate", echo, eval_flags.seed, bundle_inputs(bundle),
                        final_quality_to_json(result), elapsed_since(start),
                        eval_flags.canonical);
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
