#pragma once

#include "sdmlab/solver.hpp"

namespace sdmlab {

/// Library version reported in every run report.
constexpr const char* kLibraryVersion = "1.0.0";

/**
 * A train/test task pairing loaded from a bundle document:
 *   {"train": ["a.json", ...], "test": ["b.json", ...],
 *    "context": ["goal_state", ...],
 *    "train_potentials": ["phi.json", ...],   // optional, aligned with train
 *    "test_potentials": [...],                 // optional, aligned with test
 *    "rescale": true}
 * Paths are resolved relative to the bundle file. Every MDP must validate.
 * When potentials are present, costs are shaped at load (the same potential
 * set for the whole invocation) and Monte Carlo estimators score goal-missing
 * trajectories by truncated cost, which is what makes shaped sparse tasks
 * informative. `shaped` records that this happened.
 */
struct TaskBundle {
    std::vector<CsspMdp> train;
    std::vector<CsspMdp> test;
    ContextSpec context;
    bool rescale = true;
    bool shaped = false;
    std::vector<std::string> train_paths, test_paths;
    std::vector<std::string> train_digests, test_digests; // per input file
    std::string digest;                                   // combined
};

TaskBundle load_bundle(const std::string& path);

/// FNV-1a digest of a file's bytes, as a 16-digit hex string.
std::string file_digest_hex(const std::string& path);
/// Same digest over an in-memory string (used for canonical payloads).
std::string string_digest_hex(const std::string& text);

// --- report serialization ---------------------------------------------------
// +infinity serializes as the string "inf" next to a degenerate flag; JSON
// has no native infinity.

nlohmann::json quality_to_json(const QualityEstimate& q);
nlohmann::json difficulty_to_json(const DifficultyReport& report);
nlohmann::json prior_difficulty_to_json(const PriorDifficulty& result);
nlohmann::json q_score_to_json(const QScoreResult& result);
nlohmann::json q_sim_to_json(const QSimResult& result);
nlohmann::json final_quality_to_json(const FinalQuality& result);
nlohmann::json trace_to_json(const SolverTrace& trace);
nlohmann::json online_to_json(const OnlineStats& stats);

/// Assemble the standard report envelope around a results payload.
nlohmann::json make_run_report(const std::string& command, const nlohmann::json& config_echo,
                               uint64_t seed, const std::vector<std::string>& input_digests,
                               nlohmann::json results, double wall_seconds);

/**
 * Canonical form: every key named "timing" or prefixed "wall_clock" is
 * removed, recursively. Two runs of the same seeded command must produce
 * byte-identical canonical dumps.
 */
nlohmann::json canonical_json(const nlohmann::json& doc);

/// Sorted-key, 2-space-indent dump used for all report output.
std::string dump_report(const nlohmann::json& doc);

} // namespace sdmlab
