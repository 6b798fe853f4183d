#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdmlab {

/// One probabilistic result of executing an action: successor state,
/// probability, step cost, and one secondary cost per constraint dimension.
struct Outcome {
    int next = 0;
    double prob = 0.0;
    double cost = 0.0;
    std::vector<double> constraint_costs; // length K
};

/**
 * Goal-directed cost MDP with expected-cost constraints.
 *
 * States and actions are dense integer ids. `applicable[s]` lists the action
 * ids usable in s (strictly increasing); `transitions[s][j]` holds the
 * outcome row for the j-th applicable action of s, aligned slot for slot.
 * The goal state is terminal: it either has no applicable actions or only
 * zero-cost self-loops. Instances are treated as immutable once built;
 * every operation that needs a variant (cost shaping, encoding) returns a
 * new value.
 */
struct CsspMdp {
    int num_states = 0;
    int num_actions = 0;
    int num_constraints = 0;                                // K
    std::vector<std::vector<int>> applicable;               // per state, sorted action ids
    std::vector<std::vector<std::vector<Outcome>>> transitions; // [state][slot] -> outcomes
    std::vector<double> constraint_values;                  // V, length K
    int initial_state = 0;
    int goal_state = 0;

    /// Slot of `action` within applicable[s], or -1 if not applicable there.
    int slot_of(int s, int action) const {
        const auto& app = applicable[s];
        for (int j = 0; j < static_cast<int>(app.size()); ++j)
            if (app[j] == action) return j;
        return -1;
    }

    bool deterministic() const;
};

/// A single invariant violation found by validate_mdp. `state`, `action`
/// and `next` are -1 when the violation has no such location.
struct Violation {
    std::string code;
    std::string message;
    int state = -1;
    int action = -1;
    int next = -1;
};

/// Check every structural invariant; returns an empty list iff the model is
/// well formed. Collects all violations instead of stopping at the first.
std::vector<Violation> validate_mdp(const CsspMdp& mdp);

/// States reachable from initial_state under positive-probability outcomes
/// of any applicable action, sorted ascending. Always contains initial_state.
std::vector<int> reachable_states(const CsspMdp& mdp);

/// Deterministic edge of a classical planning task: action `action` taken in
/// `state` leads to `next` at cost `weight`.
struct ClassicalEdge {
    int state = 0;
    int action = 0;
    int next = 0;
    double weight = 1.0;
};

/// Deterministic shortest-path style task used as encoding input. Edges are
/// deterministic: at most one next-state per (state, action) pair.
struct ClassicalTask {
    int num_states = 0;
    int num_actions = 0;
    std::vector<ClassicalEdge> edges;
    int initial_state = 0;
    int goal_state = 0;
};

/// True iff the goal is reachable from the initial state along task edges.
bool goal_reachable(const ClassicalTask& task);

/// Minimal total edge weight from initial to goal (uniform-cost search).
/// Throws Error if the goal is unreachable.
double optimal_plan_cost(const ClassicalTask& task);

enum class EncodeMode {
    optimal,     // unit/weight costs, one constraint pinning expected cost to the optimum
    satisficing, // weight costs, no constraints: quality favors shorter plans
    agile        // cost only on entering the goal: every proper policy has quality 1
};

/**
 * Embed a classical task as a constrained cost MDP.
 *
 * All transitions are deterministic. In `optimal` mode a single constraint
 * duplicates the cost function with bound `optimal_cost` (computed by
 * uniform-cost search when not supplied), so only optimal plans keep nonzero
 * quality. In `satisficing` mode there are no constraints and quality is the
 * reciprocal plan cost. In `agile` mode only the transition into the goal
 * costs anything, so every goal-reaching policy is worth exactly 1.
 * Throws Error when the goal is unreachable (no proper policy would exist)
 * or when edges are nondeterministic.
 */
CsspMdp encode_classical(const ClassicalTask& task, EncodeMode mode,
                         std::optional<double> optimal_cost = std::nullopt);

/// State potential for cost shaping. values[s] is finite and
/// values[goal_state] must be exactly 0 so shaped and raw total costs agree
/// on goal-reaching runs up to the start offset.
struct PotentialFunction {
    std::vector<double> values;
};

/// Potential-based reshaping: c~(s,a,s') = c(s,a,s') + phi(s') - phi(s).
/// Constraint costs and bounds are untouched. Throws Error if any shaped
/// cost would be negative or phi violates its invariants.
CsspMdp shape_costs(const CsspMdp& mdp, const PotentialFunction& phi);

// --- JSON schemas -----------------------------------------------------------
//
// MDP document:
//   {"states": N, "actions": M,
//    "applicable": [[a,...], ...],                      // per state
//    "transitions": [{"s":i,"a":j,"next":[[s',p],...]}, ...],
//    "costs": [{"s":i,"a":j,"next":k,"c":x}, ...],      // absent entries are 0
//    "constraint_costs": [{"s":i,"a":j,"next":k,"d":[...]}, ...],
//    "constraint_values": [v,...], "initial": i0, "goal": g}
// Cost entries must reference listed transitions. Classical task document:
//   {"states": N, "actions": M,
//    "edges": [{"s":i,"a":j,"next":k,"weight":w}, ...],
//    "initial": i0, "goal": g}
// Potential document: {"values": [phi_0, ...]}

nlohmann::json mdp_to_json(const CsspMdp& mdp);
CsspMdp mdp_from_json(const nlohmann::json& doc);
CsspMdp load_mdp(const std::string& path);
void save_mdp(const CsspMdp& mdp, const std::string& path);

nlohmann::json classical_to_json(const ClassicalTask& task);
ClassicalTask classical_from_json(const nlohmann::json& doc);
ClassicalTask load_classical(const std::string& path);

nlohmann::json potential_to_json(const PotentialFunction& phi);
PotentialFunction potential_from_json(const nlohmann::json& doc);

} // namespace sdmlab
