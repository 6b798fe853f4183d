#pragma once

#include <cstdint>

#include "sdmlab/mdp.hpp"

namespace sdmlab {

/// Knobs for generate_random_mdp. Defaults give a small stochastic model.
struct RandomMdpConfig {
    int num_states = 6;
    int num_actions = 3;   // size of the global action label pool
    int max_branching = 2; // applicable actions per non-goal state, 1..this
    int max_outcomes = 2;  // successors per action, 1..this; 1 = deterministic
    int num_constraints = 0;
    double cost_min = 0.5;
    double cost_max = 1.5;
    uint64_t seed = 0;
};

/**
 * Deterministically generate a well-formed goal-reachable MDP from a seed.
 *
 * State 0 is initial, the last state is the goal (terminal, no actions).
 * Every non-goal state gets 1..max_branching distinct actions with
 * 1..max_outcomes distinct successors each; outcome probabilities are
 * normalized draws bounded away from zero. A backbone edge from each state s
 * to s+1 is forced (by redirecting the first outcome of the first action) so
 * the goal is always reachable. Constraint bounds are set loose enough that
 * short policies satisfy them. Same config, same model, bit for bit.
 */
CsspMdp generate_random_mdp(const RandomMdpConfig& config);

/**
 * Four-connected grid as a classical task. Cells are row-major states; the
 * initial state is the top-left cell, the goal the bottom-right. Actions
 * 0..3 are up/down/left/right and exist only where they stay on the grid.
 * All edge weights are 1.
 */
ClassicalTask make_grid_task(int rows, int cols);

} // namespace sdmlab
