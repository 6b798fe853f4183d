#include "sdmlab/bundle.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdmlab/error.hpp"

namespace sdmlab {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string hex16(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::vector<std::string> string_array(const nlohmann::json& doc, const char* name) {
    std::vector<std::string> out;
    const nlohmann::json& arr = doc.at(name);
    if (!arr.is_array()) throw ParseError(std::string("\"") + name + "\" must be an array");
    for (const nlohmann::json& item : arr) {
        if (!item.is_string())
            throw ParseError(std::string("\"") + name + "\" entries must be strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::string resolve(const std::filesystem::path& base, const std::string& entry) {
    std::filesystem::path p(entry);
    if (p.is_absolute()) return p.string();
    return (base / p).string();
}

/// Serialize a double, turning +infinity into the "inf" sentinel and
/// flagging it (JSON has no native infinity).
nlohmann::json number_or_inf(double v, bool& any_inf) {
    if (std::isinf(v)) {
        any_inf = true;
        return "inf";
    }
    return v;
}

} // namespace

std::string file_digest_hex(const std::string& path) {
    std::string bytes = read_file(path);
    return hex16(detail::fnv1a_bytes(bytes.data(), bytes.size()));
}

std::string string_digest_hex(const std::string& text) {
    return hex16(detail::fnv1a_bytes(text.data(), text.size()));
}

TaskBundle load_bundle(const std::string& path) {
    std::string text = read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError(path + ": bundle must be a JSON object");
    static const char* known[] = {"train", "test", "context", "train_potentials",
                                  "test_potentials", "rescale"};
    for (const auto& [key, value] : doc.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParseError(path + ": unknown bundle field \"" + key + "\"");
    }
    if (!doc.contains("train")) throw ParseError(path + ": bundle needs a \"train\" list");

    TaskBundle bundle;
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    try {
        bundle.train_paths = string_array(doc, "train");
        if (doc.contains("test")) bundle.test_paths = string_array(doc, "test");
        if (doc.contains("context"))
            bundle.context = context_spec_from_names(string_array(doc, "context"));
        if (doc.contains("rescale")) {
            if (!doc.at("rescale").is_boolean())
                throw ParseError(path + ": \"rescale\" must be a boolean");
            bundle.rescale = doc.at("rescale").get<bool>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (bundle.train_paths.empty()) throw ParseError(path + ": \"train\" must not be empty");

    for (std::string& entry : bundle.train_paths) entry = resolve(base, entry);
    for (std::string& entry : bundle.test_paths) entry = resolve(base, entry);

    uint64_t combined = 0xcbf29ce484222325ULL;
    for (const std::string& file : bundle.train_paths) {
        bundle.train.push_back(load_mdp(file));
        bundle.train_digests.push_back(file_digest_hex(file));
        combined = detail::fnv1a_string(bundle.train_digests.back(), combined);
    }
    for (const std::string& file : bundle.test_paths) {
        bundle.test.push_back(load_mdp(file));
        bundle.test_digests.push_back(file_digest_hex(file));
        combined = detail::fnv1a_string(bundle.test_digests.back(), combined);
    }

    auto shape_list = [&](const char* name, std::vector<CsspMdp>& mdps) {
        if (!doc.contains(name)) return;
        std::vector<std::string> files = string_array(doc, name);
        if (files.size() != mdps.size())
            throw ParseError(path + ": \"" + name + "\" must list one potential per MDP");
        for (size_t i = 0; i < files.size(); ++i) {
            std::string full = resolve(base, files[i]);
            nlohmann::json phi_doc;
            try {
                phi_doc = nlohmann::json::parse(read_file(full));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(full + ": " + e.what());
            }
            mdps[i] = shape_costs(mdps[i], potential_from_json(phi_doc));
            combined = detail::fnv1a_string(file_digest_hex(full), combined);
        }
        bundle.shaped = true;
    };
    shape_list("train_potentials", bundle.train);
    shape_list("test_potentials", bundle.test);

    combined = detail::fnv1a_string(bundle.rescale ? "rescale" : "raw", combined);
    for (const std::string& name : context_spec_names(bundle.context))
        combined = detail::fnv1a_string(name, combined);
    bundle.digest = hex16(combined);
    return bundle;
}

// --- report serialization ---------------------------------------------------

nlohmann::json quality_to_json(const QualityEstimate& q) {
    bool any_inf = false;
    nlohmann::json dcosts = nlohmann::json::array();
    for (double d : q.expected_constraint_costs) dcosts.push_back(number_or_inf(d, any_inf));
    nlohmann::json out{{"proper", q.proper},
                       {"expected_total_cost", number_or_inf(q.expected_total_cost, any_inf)},
                       {"expected_constraint_costs", dcosts},
                       {"constraints_satisfied", q.constraints_satisfied},
                       {"quality", q.quality}};
    if (any_inf) out["degenerate"] = true;
    return out;
}

nlohmann::json difficulty_to_json(const DifficultyReport& report) {
    bool any_inf = false;
    nlohmann::json out{{"method", report.method},
                       {"train_term", number_or_inf(report.train_term, any_inf)},
                       {"distance_term", number_or_inf(report.distance_term, any_inf)},
                       {"total", number_or_inf(report.total, any_inf)},
                       {"degenerate", report.degenerate || any_inf},
                       {"sample_count", report.sample_count}};
    if (report.method == "monte_carlo") {
        out["rollouts_per_policy"] = report.rollouts_per_policy;
        out["seed"] = report.seed;
    }
    return out;
}

nlohmann::json prior_difficulty_to_json(const PriorDifficulty& result) {
    bool any_inf = false;
    return nlohmann::json{{"value", number_or_inf(result.value, any_inf)},
                          {"degenerate", result.degenerate || any_inf},
                          {"samples", result.samples},
                          {"seed", result.seed}};
}

nlohmann::json q_score_to_json(const QScoreResult& result) {
    // The time-normalized variant depends on wall clock, so it lives under
    // "timing" and drops out of the canonical form.
    return nlohmann::json{{"raw", result.raw},
                          {"capped", result.capped},
                          {"pairs_used", result.pairs_used},
                          {"pairs_skipped", result.pairs_skipped},
                          {"samples", result.samples},
                          {"seed", result.seed},
                          {"timing",
                           {{"per_second", result.per_second},
                            {"mean_scorer_seconds", result.mean_scorer_seconds}}}};
}

nlohmann::json q_sim_to_json(const QSimResult& result) {
    return nlohmann::json{{"value", result.value},
                          {"capped", result.capped},
                          {"samples", result.samples},
                          {"seed", result.seed}};
}

nlohmann::json final_quality_to_json(const FinalQuality& result) {
    nlohmann::json per_mdp = nlohmann::json::array();
    for (const QualityEstimate& q : result.per_mdp) per_mdp.push_back(quality_to_json(q));
    return nlohmann::json{{"per_mdp", per_mdp}, {"set_quality", result.set_quality}};
}

nlohmann::json online_to_json(const OnlineStats& stats) {
    return nlohmann::json{{"memory_entries", stats.memory_entries},
                          {"probe_steps", stats.probe_steps},
                          {"timing",
                           {{"mean_selection_seconds", stats.mean_selection_seconds},
                            {"max_selection_seconds", stats.max_selection_seconds}}}};
}

nlohmann::json trace_to_json(const SolverTrace& trace) {
    // Per-iteration records are emitted as CSV, not JSON; the report carries
    // the run summary and the final artifacts.
    nlohmann::json probes = nlohmann::json::array();
    for (const GreedyProbe& p : trace.greedy_probes)
        probes.push_back({{"iter", p.iter}, {"quality", p.quality}});
    nlohmann::json out{{"iterations_run", trace.iterations_run},
                       {"converged", trace.converged},
                       {"budget_exhausted", trace.budget_exhausted},
                       {"degenerate_budget", trace.degenerate_budget},
                       {"total_scorer_rollouts", trace.total_scorer_rollouts},
                       {"peak_weight_entries", trace.peak_weight_entries},
                       {"greedy_probes", probes},
                       {"final_estimate", factorized_to_json(trace.final_estimate)},
                       {"greedy", policy_to_json(trace.greedy)},
                       {"online_measured", trace.online_measured},
                       {"timing", {{"wall_seconds", trace.wall_seconds}}}};
    if (trace.online_measured) out["online"] = online_to_json(trace.online);
    return out;
}

nlohmann::json make_run_report(const std::string& command, const nlohmann::json& config_echo,
                               uint64_t seed, const std::vector<std::string>& input_digests,
                               nlohmann::json results, double wall_seconds) {
    return nlohmann::json{{"command", command},
                          {"version", kLibraryVersion},
                          {"seed", seed},
                          {"config", config_echo},
                          {"inputs", input_digests},
                          {"results", std::move(results)},
                          {"timing", {{"wall_clock_seconds", wall_seconds}}}};
}

nlohmann::json canonical_json(const nlohmann::json& doc) {
    if (doc.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, value] : doc.items()) {
            if (key == "timing" || key.rfind("wall_clock", 0) == 0) continue;
            out[key] = canonical_json(value);
        }
        return out;
    }
    if (doc.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const nlohmann::json& item : doc) out.push_back(canonical_json(item));
        return out;
    }
    return doc;
}

std::string dump_report(const nlohmann::json& doc) {
    return doc.dump(2) + "\n";
}

} // namespace sdmlab
