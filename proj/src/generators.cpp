#include "sdmlab/generators.hpp"

#include <algorithm>

#include "sdmlab/error.hpp"
#include "sdmlab/rng.hpp"

namespace sdmlab {

CsspMdp generate_random_mdp(const RandomMdpConfig& config) {
    if (config.num_states < 2) throw Error("random MDP needs at least 2 states");
    if (config.max_branching < 1 || config.max_branching > config.num_actions)
        throw Error("max_branching must be between 1 and num_actions");
    if (config.max_outcomes < 1 || config.max_outcomes > config.num_states)
        throw Error("max_outcomes must be between 1 and num_states");
    if (!(config.cost_min >= 0.0) || config.cost_max < config.cost_min)
        throw Error("cost range must satisfy 0 <= cost_min <= cost_max");

    SeedStream root(config.seed);
    CsspMdp mdp;
    mdp.num_states = config.num_states;
    mdp.num_actions = config.num_actions;
    mdp.num_constraints = config.num_constraints;
    mdp.initial_state = 0;
    mdp.goal_state = config.num_states - 1;
    mdp.applicable.resize(config.num_states);
    mdp.transitions.resize(config.num_states);

    auto pick_distinct = [](SeedStream& st, int count, int bound) {
        std::vector<int> pool(bound);
        for (int i = 0; i < bound; ++i) pool[i] = i;
        std::vector<int> out;
        for (int i = 0; i < count; ++i) {
            int j = static_cast<int>(st.next_below(pool.size()));
            out.push_back(pool[j]);
            pool.erase(pool.begin() + j);
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    for (int s = 0; s + 1 < config.num_states; ++s) {
        SeedStream st = root.child("state", static_cast<uint64_t>(s));
        int branching = 1 + static_cast<int>(st.next_below(config.max_branching));
        mdp.applicable[s] = pick_distinct(st, branching, config.num_actions);
        for (size_t slot = 0; slot < mdp.applicable[s].size(); ++slot) {
            int fanout = 1 + static_cast<int>(st.next_below(config.max_outcomes));
            std::vector<int> succ = pick_distinct(st, fanout, config.num_states);
            std::vector<Outcome> row(succ.size());
            double mass = 0.0;
            for (size_t i = 0; i < succ.size(); ++i) {
                row[i].next = succ[i];
                // Offset keeps every listed branch at meaningful probability,
                // which bounds rollout lengths in expectation.
                row[i].prob = 0.1 + st.next_double();
                row[i].cost =
                    config.cost_min + st.next_double() * (config.cost_max - config.cost_min);
                row[i].constraint_costs.resize(config.num_constraints);
                for (double& d : row[i].constraint_costs) d = st.next_double();
                mass += row[i].prob;
            }
            for (Outcome& o : row) o.prob /= mass;
            mdp.transitions[s].push_back(std::move(row));
        }
        // Backbone: the first outcome of the first action walks the state
        // chain, so the goal is reachable no matter what the draws did. The
        // overwrite can collide with a drawn successor; fold such duplicates
        // into the backbone outcome because (s, a, s') keys the file format.
        std::vector<Outcome>& backbone = mdp.transitions[s][0];
        backbone[0].next = s + 1;
        for (size_t i = backbone.size(); i-- > 1;)
            if (backbone[i].next == s + 1) {
                backbone[0].prob += backbone[i].prob;
                backbone.erase(backbone.begin() + i);
            }
    }

    // Loose constraint bounds: a straight backbone walk stays well inside.
    mdp.constraint_values.assign(config.num_constraints,
                                 static_cast<double>(config.num_states) * 4.0);
    return mdp;
}

ClassicalTask make_grid_task(int rows, int cols) {
    if (rows < 1 || cols < 1) throw Error("grid needs positive dimensions");
    ClassicalTask task;
    task.num_states = rows * cols;
    task.num_actions = 4; // up, down, left, right
    task.initial_state = 0;
    task.goal_state = rows * cols - 1;
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (r > 0) task.edges.push_back({id(r, c), 0, id(r - 1, c), 1.0});
            if (r + 1 < rows) task.edges.push_back({id(r, c), 1, id(r + 1, c), 1.0});
            if (c > 0) task.edges.push_back({id(r, c), 2, id(r, c - 1), 1.0});
            if (c + 1 < cols) task.edges.push_back({id(r, c), 3, id(r, c + 1), 1.0});
        }
    return task;
}

} // namespace sdmlab
