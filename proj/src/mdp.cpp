#include "sdmlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "sdmlab/error.hpp"

namespace sdmlab {

namespace {

constexpr double kProbTol = 1e-9;

// Shaped costs may pick up dust of a few ulps from phi arithmetic; anything
// below this magnitude is rounding, anything above is a real sign violation.
constexpr double kShapeDust = 1e-12;

std::string loc(int s, int a, int next) {
    std::ostringstream os;
    os << "(s=" << s << ", a=" << a;
    if (next >= 0) os << ", s'=" << next;
    os << ")";
    return os.str();
}

void push(std::vector<Violation>& out, std::string code, std::string msg, int s = -1, int a = -1,
          int next = -1) {
    out.push_back(Violation{std::move(code), std::move(msg), s, a, next});
}

} // namespace

bool CsspMdp::deterministic() const {
    for (const auto& rows : transitions)
        for (const auto& row : rows)
            if (row.size() != 1) return false;
    return true;
}

std::vector<Violation> validate_mdp(const CsspMdp& mdp) {
    std::vector<Violation> out;

    if (mdp.num_states < 1) push(out, "states", "num_states must be at least 1");
    if (mdp.num_actions < 0) push(out, "actions", "num_actions must be nonnegative");
    if (mdp.num_constraints < 0) push(out, "constraints", "num_constraints must be nonnegative");
    if (static_cast<int>(mdp.applicable.size()) != mdp.num_states)
        push(out, "shape", "applicable has " + std::to_string(mdp.applicable.size()) +
                               " entries, expected one per state");
    if (static_cast<int>(mdp.transitions.size()) != mdp.num_states)
        push(out, "shape", "transitions has " + std::to_string(mdp.transitions.size()) +
                               " entries, expected one per state");
    if (static_cast<int>(mdp.constraint_values.size()) != mdp.num_constraints)
        push(out, "constraints", "constraint_values length " +
                                     std::to_string(mdp.constraint_values.size()) +
                                     " does not match K=" + std::to_string(mdp.num_constraints));
    // Shape problems make the per-state checks unsafe; stop here.
    if (!out.empty()) return out;

    if (mdp.initial_state < 0 || mdp.initial_state >= mdp.num_states)
        push(out, "initial", "initial state " + std::to_string(mdp.initial_state) + " out of range");
    if (mdp.goal_state < 0 || mdp.goal_state >= mdp.num_states)
        push(out, "goal", "goal state " + std::to_string(mdp.goal_state) + " out of range");

    for (int s = 0; s < mdp.num_states; ++s) {
        const auto& app = mdp.applicable[s];
        if (static_cast<int>(mdp.transitions[s].size()) != static_cast<int>(app.size())) {
            push(out, "shape",
                 "state " + std::to_string(s) + " has " + std::to_string(mdp.transitions[s].size()) +
                     " transition rows for " + std::to_string(app.size()) + " applicable actions",
                 s);
            continue;
        }
        if (app.empty() && s != mdp.goal_state)
            push(out, "no_applicable", "non-goal state " + std::to_string(s) +
                                           " has no applicable actions", s);
        for (size_t j = 0; j < app.size(); ++j) {
            int a = app[j];
            if (a < 0 || a >= mdp.num_actions)
                push(out, "action_range", "action " + std::to_string(a) + " out of range at " +
                                              loc(s, a, -1), s, a);
            if (j > 0 && app[j - 1] >= a)
                push(out, "action_order",
                     "applicable actions of state " + std::to_string(s) +
                         " are not strictly increasing", s, a);

            const auto& row = mdp.transitions[s][j];
            if (row.empty()) {
                push(out, "missing_row", "no outcomes listed for applicable pair " + loc(s, a, -1),
                     s, a);
                continue;
            }
            double mass = 0.0;
            for (const Outcome& o : row) {
                if (o.next < 0 || o.next >= mdp.num_states)
                    push(out, "next_range", "successor " + std::to_string(o.next) +
                                                " out of range at " + loc(s, a, o.next),
                         s, a, o.next);
                if (!(o.prob >= 0.0))
                    push(out, "probability", "negative or NaN probability at " + loc(s, a, o.next),
                         s, a, o.next);
                if (!(o.cost >= 0.0) || !std::isfinite(o.cost))
                    push(out, "negative_cost", "cost must be finite and nonnegative at " +
                                                   loc(s, a, o.next), s, a, o.next);
                if (static_cast<int>(o.constraint_costs.size()) != mdp.num_constraints)
                    push(out, "constraint_length",
                         "constraint cost vector at " + loc(s, a, o.next) + " has length " +
                             std::to_string(o.constraint_costs.size()) + ", expected K=" +
                             std::to_string(mdp.num_constraints), s, a, o.next);
                for (double d : o.constraint_costs)
                    if (!std::isfinite(d)) {
                        push(out, "constraint_value", "non-finite constraint cost at " +
                                                          loc(s, a, o.next), s, a, o.next);
                        break;
                    }
                mass += o.prob;
            }
            if (std::abs(mass - 1.0) > kProbTol)
                push(out, "probability_mass",
                     "probabilities for " + loc(s, a, -1) + " sum to " + std::to_string(mass), s, a);
        }
    }

    // Goal terminality: no actions, or pure zero-cost self-loops.
    if (mdp.goal_state >= 0 && mdp.goal_state < mdp.num_states) {
        int g = mdp.goal_state;
        for (size_t j = 0; j < mdp.applicable[g].size(); ++j) {
            if (static_cast<int>(mdp.transitions[g].size()) <= static_cast<int>(j)) break;
            for (const Outcome& o : mdp.transitions[g][j]) {
                bool self = o.next == g;
                bool free = o.cost == 0.0;
                for (double d : o.constraint_costs) free = free && d == 0.0;
                if (!self || !free) {
                    push(out, "goal_terminal",
                         "goal state has a non-terminal transition at " +
                             loc(g, mdp.applicable[g][j], o.next), g, mdp.applicable[g][j], o.next);
                }
            }
        }
    }

    return out;
}

std::vector<int> reachable_states(const CsspMdp& mdp) {
    std::vector<char> seen(mdp.num_states, 0);
    std::vector<int> stack{mdp.initial_state};
    seen[mdp.initial_state] = 1;
    while (!stack.empty()) {
        int s = stack.back();
        stack.pop_back();
        for (const auto& row : mdp.transitions[s])
            for (const Outcome& o : row)
                if (o.prob > 0.0 && !seen[o.next]) {
                    seen[o.next] = 1;
                    stack.push_back(o.next);
                }
    }
    std::vector<int> out;
    for (int s = 0; s < mdp.num_states; ++s)
        if (seen[s]) out.push_back(s);
    return out;
}

// --- classical tasks --------------------------------------------------------

namespace {

void check_classical(const ClassicalTask& task) {
    if (task.num_states < 1) throw Error("classical task needs at least one state");
    if (task.initial_state < 0 || task.initial_state >= task.num_states)
        throw Error("classical task initial state out of range");
    if (task.goal_state < 0 || task.goal_state >= task.num_states)
        throw Error("classical task goal state out of range");
    std::vector<std::vector<char>> seen(task.num_states);
    for (const ClassicalEdge& e : task.edges) {
        if (e.state < 0 || e.state >= task.num_states || e.next < 0 || e.next >= task.num_states)
            throw Error("classical edge references a state out of range");
        if (e.action < 0 || e.action >= task.num_actions)
            throw Error("classical edge references an action out of range");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw Error("classical edge weights must be positive and finite");
        auto& row = seen[e.state];
        if (row.empty()) row.assign(task.num_actions, 0);
        if (row[e.action]) throw Error("classical task is nondeterministic: duplicate edge for " +
                                       loc(e.state, e.action, -1));
        row[e.action] = 1;
    }
}

} // namespace

bool goal_reachable(const ClassicalTask& task) {
    std::vector<char> seen(task.num_states, 0);
    std::vector<int> stack{task.initial_state};
    seen[task.initial_state] = 1;
    while (!stack.empty()) {
        int s = stack.back();
        stack.pop_back();
        for (const ClassicalEdge& e : task.edges)
            if (e.state == s && !seen[e.next]) {
                seen[e.next] = 1;
                stack.push_back(e.next);
            }
    }
    return seen[task.goal_state];
}

double optimal_plan_cost(const ClassicalTask& task) {
    check_classical(task);
    std::vector<std::vector<std::pair<int, double>>> adj(task.num_states);
    for (const ClassicalEdge& e : task.edges)
        if (e.state != task.goal_state) adj[e.state].push_back({e.next, e.weight});

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(task.num_states, inf);
    dist[task.initial_state] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0.0, task.initial_state});
    while (!pq.empty()) {
        auto [d, s] = pq.top();
        pq.pop();
        if (d > dist[s]) continue;
        for (auto [t, w] : adj[s])
            if (d + w < dist[t]) {
                dist[t] = d + w;
                pq.push({dist[t], t});
            }
    }
    if (!(dist[task.goal_state] < inf)) throw Error("goal unreachable: no plan exists");
    return dist[task.goal_state];
}

CsspMdp encode_classical(const ClassicalTask& task, EncodeMode mode,
                         std::optional<double> optimal_cost) {
    check_classical(task);
    if (!goal_reachable(task))
        throw Error("goal unreachable from initial state: no proper policy exists");

    CsspMdp mdp;
    mdp.num_states = task.num_states;
    mdp.num_actions = task.num_actions;
    mdp.initial_state = task.initial_state;
    mdp.goal_state = task.goal_state;
    mdp.applicable.resize(task.num_states);
    mdp.transitions.resize(task.num_states);

    int k = mode == EncodeMode::optimal ? 1 : 0;
    mdp.num_constraints = k;

    std::vector<const ClassicalEdge*> sorted;
    for (const ClassicalEdge& e : task.edges)
        if (e.state != task.goal_state) sorted.push_back(&e); // goal stays terminal
    std::sort(sorted.begin(), sorted.end(), [](const ClassicalEdge* a, const ClassicalEdge* b) {
        return std::tie(a->state, a->action) < std::tie(b->state, b->action);
    });

    for (const ClassicalEdge* e : sorted) {
        double c = mode == EncodeMode::agile ? (e->next == task.goal_state ? e->weight : 0.0)
                                             : e->weight;
        Outcome o;
        o.next = e->next;
        o.prob = 1.0;
        o.cost = c;
        if (k == 1) o.constraint_costs = {c}; // optimal mode: D duplicates C
        mdp.applicable[e->state].push_back(e->action);
        mdp.transitions[e->state].push_back({o});
    }

    if (mode == EncodeMode::optimal) {
        double v1 = optimal_cost ? *optimal_cost : optimal_plan_cost(task);
        mdp.constraint_values = {v1};
    }
    return mdp;
}

CsspMdp shape_costs(const CsspMdp& mdp, const PotentialFunction& phi) {
    if (static_cast<int>(phi.values.size()) != mdp.num_states)
        throw Error("potential has " + std::to_string(phi.values.size()) + " values for " +
                    std::to_string(mdp.num_states) + " states");
    for (double v : phi.values)
        if (!std::isfinite(v)) throw Error("potential values must be finite");
    if (phi.values[mdp.goal_state] != 0.0)
        throw Error("potential must be exactly 0 at the goal state");

    CsspMdp out = mdp;
    for (int s = 0; s < out.num_states; ++s)
        for (size_t j = 0; j < out.transitions[s].size(); ++j)
            for (Outcome& o : out.transitions[s][j]) {
                double shaped = o.cost + phi.values[o.next] - phi.values[s];
                if (shaped < -kShapeDust)
                    throw Error("shaping would make cost negative (" + std::to_string(shaped) +
                                ") at " + loc(s, out.applicable[s][j], o.next));
                o.cost = std::max(shaped, 0.0);
            }
    return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

using nlohmann::json;

const json& field(const json& doc, const char* name) {
    auto it = doc.find(name);
    if (it == doc.end()) throw ParseError(std::string("missing field \"") + name + "\"");
    return *it;
}

int int_field(const json& doc, const char* name) {
    const json& v = field(doc, name);
    if (!v.is_number_integer()) throw ParseError(std::string("field \"") + name + "\" must be an integer");
    return v.get<int>();
}

double num_field(const json& doc, const char* name) {
    const json& v = field(doc, name);
    if (!v.is_number()) throw ParseError(std::string("field \"") + name + "\" must be a number");
    return v.get<double>();
}

json load_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError(path + ": top-level value must be an object");
    return doc;
}

} // namespace

nlohmann::json mdp_to_json(const CsspMdp& mdp) {
    json doc;
    doc["states"] = mdp.num_states;
    doc["actions"] = mdp.num_actions;
    doc["applicable"] = mdp.applicable;
    json trans = json::array();
    json costs = json::array();
    json dcosts = json::array();
    for (int s = 0; s < mdp.num_states; ++s)
        for (size_t j = 0; j < mdp.applicable[s].size(); ++j) {
            int a = mdp.applicable[s][j];
            json next = json::array();
            for (const Outcome& o : mdp.transitions[s][j]) {
                next.push_back(json::array({o.next, o.prob}));
                if (o.cost != 0.0)
                    costs.push_back({{"s", s}, {"a", a}, {"next", o.next}, {"c", o.cost}});
                bool any = false;
                for (double d : o.constraint_costs) any = any || d != 0.0;
                if (any)
                    dcosts.push_back(
                        {{"s", s}, {"a", a}, {"next", o.next}, {"d", o.constraint_costs}});
            }
            trans.push_back({{"s", s}, {"a", a}, {"next", std::move(next)}});
        }
    doc["transitions"] = std::move(trans);
    doc["costs"] = std::move(costs);
    doc["constraint_costs"] = std::move(dcosts);
    doc["constraint_values"] = mdp.constraint_values;
    doc["initial"] = mdp.initial_state;
    doc["goal"] = mdp.goal_state;
    return doc;
}

CsspMdp mdp_from_json(const nlohmann::json& doc) {
    CsspMdp mdp;
    mdp.num_states = int_field(doc, "states");
    mdp.num_actions = int_field(doc, "actions");
    if (mdp.num_states < 1) throw ParseError("\"states\" must be at least 1");
    if (mdp.num_actions < 0) throw ParseError("\"actions\" must be nonnegative");
    mdp.initial_state = int_field(doc, "initial");
    mdp.goal_state = int_field(doc, "goal");

    const json& vj = field(doc, "constraint_values");
    if (!vj.is_array()) throw ParseError("\"constraint_values\" must be an array");
    for (const json& v : vj) {
        if (!v.is_number()) throw ParseError("constraint values must be numbers");
        mdp.constraint_values.push_back(v.get<double>());
    }
    mdp.num_constraints = static_cast<int>(mdp.constraint_values.size());

    const json& app = field(doc, "applicable");
    if (!app.is_array() || static_cast<int>(app.size()) != mdp.num_states)
        throw ParseError("\"applicable\" must be an array with one entry per state");
    mdp.applicable.resize(mdp.num_states);
    mdp.transitions.resize(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        if (!app[s].is_array()) throw ParseError("\"applicable\" entries must be arrays");
        for (const json& a : app[s]) {
            if (!a.is_number_integer()) throw ParseError("applicable action ids must be integers");
            mdp.applicable[s].push_back(a.get<int>());
        }
        mdp.transitions[s].resize(mdp.applicable[s].size());
    }

    const json& trans = field(doc, "transitions");
    if (!trans.is_array()) throw ParseError("\"transitions\" must be an array");
    for (const json& row : trans) {
        if (!row.is_object()) throw ParseError("transition entries must be objects");
        int s = int_field(row, "s");
        int a = int_field(row, "a");
        if (s < 0 || s >= mdp.num_states)
            throw ParseError("transition state " + std::to_string(s) + " out of range");
        int j = mdp.slot_of(s, a);
        if (j < 0)
            throw Error("transition listed for inapplicable pair " + loc(s, a, -1));
        if (!mdp.transitions[s][j].empty())
            throw Error("duplicate transition row for " + loc(s, a, -1));
        const json& next = field(row, "next");
        if (!next.is_array() || next.empty())
            throw ParseError("transition \"next\" must be a nonempty array");
        for (const json& pair : next) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
                !pair[1].is_number())
                throw ParseError("transition outcomes must be [state, probability] pairs");
            Outcome o;
            o.next = pair[0].get<int>();
            o.prob = pair[1].get<double>();
            o.constraint_costs.assign(mdp.num_constraints, 0.0);
            mdp.transitions[s][j].push_back(std::move(o));
        }
    }

    auto rows_for = [&](const json& entry, const char* what) -> std::pair<int, int> {
        int s = int_field(entry, "s");
        int a = int_field(entry, "a");
        if (s < 0 || s >= mdp.num_states)
            throw ParseError(std::string(what) + " state " + std::to_string(s) + " out of range");
        int j = mdp.slot_of(s, a);
        if (j < 0) throw Error(std::string(what) + " listed for inapplicable pair " + loc(s, a, -1));
        return {s, j};
    };

    const json& costs = field(doc, "costs");
    if (!costs.is_array()) throw ParseError("\"costs\" must be an array");
    for (const json& entry : costs) {
        auto [s, j] = rows_for(entry, "cost");
        int k = int_field(entry, "next");
        double c = num_field(entry, "c");
        bool hit = false;
        for (Outcome& o : mdp.transitions[s][j])
            if (o.next == k) {
                o.cost = c;
                hit = true;
            }
        if (!hit)
            throw ParseError("cost entry references unlisted transition " +
                             loc(s, mdp.applicable[s][j], k));
    }

    const json& dcosts = field(doc, "constraint_costs");
    if (!dcosts.is_array()) throw ParseError("\"constraint_costs\" must be an array");
    for (const json& entry : dcosts) {
        auto [s, j] = rows_for(entry, "constraint cost");
        int k = int_field(entry, "next");
        const json& d = field(entry, "d");
        if (!d.is_array() || static_cast<int>(d.size()) != mdp.num_constraints)
            throw ParseError("constraint cost vectors must have length K");
        std::vector<double> vec;
        for (const json& x : d) {
            if (!x.is_number()) throw ParseError("constraint costs must be numbers");
            vec.push_back(x.get<double>());
        }
        bool hit = false;
        for (Outcome& o : mdp.transitions[s][j])
            if (o.next == k) {
                o.constraint_costs = vec;
                hit = true;
            }
        if (!hit)
            throw ParseError("constraint cost entry references unlisted transition " +
                             loc(s, mdp.applicable[s][j], k));
    }

    return mdp;
}

CsspMdp load_mdp(const std::string& path) {
    CsspMdp mdp = mdp_from_json(load_document(path));
    auto violations = validate_mdp(mdp);
    if (!violations.empty()) {
        std::ostringstream os;
        os << path << ": invalid MDP (" << violations.size() << " violation"
           << (violations.size() == 1 ? "" : "s") << "); first: " << violations.front().code
           << ": " << violations.front().message;
        throw Error(os.str());
    }
    return mdp;
}

void save_mdp(const CsspMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << mdp_to_json(mdp).dump(2) << "\n";
}

nlohmann::json classical_to_json(const ClassicalTask& task) {
    json doc;
    doc["states"] = task.num_states;
    doc["actions"] = task.num_actions;
    json edges = json::array();
    for (const ClassicalEdge& e : task.edges)
        edges.push_back({{"s", e.state}, {"a", e.action}, {"next", e.next}, {"weight", e.weight}});
    doc["edges"] = std::move(edges);
    doc["initial"] = task.initial_state;
    doc["goal"] = task.goal_state;
    return doc;
}

ClassicalTask classical_from_json(const nlohmann::json& doc) {
    ClassicalTask task;
    task.num_states = int_field(doc, "states");
    task.num_actions = int_field(doc, "actions");
    task.initial_state = int_field(doc, "initial");
    task.goal_state = int_field(doc, "goal");
    const json& edges = field(doc, "edges");
    if (!edges.is_array()) throw ParseError("\"edges\" must be an array");
    for (const json& e : edges) {
        ClassicalEdge edge;
        edge.state = int_field(e, "s");
        edge.action = int_field(e, "a");
        edge.next = int_field(e, "next");
        edge.weight = e.contains("weight") ? num_field(e, "weight") : 1.0;
        task.edges.push_back(edge);
    }
    check_classical(task);
    return task;
}

ClassicalTask load_classical(const std::string& path) {
    return classical_from_json(load_document(path));
}

nlohmann::json potential_to_json(const PotentialFunction& phi) {
    return json{{"values", phi.values}};
}

PotentialFunction potential_from_json(const nlohmann::json& doc) {
    const json& vals = field(doc, "values");
    if (!vals.is_array()) throw ParseError("\"values\" must be an array");
    PotentialFunction phi;
    for (const json& v : vals) {
        if (!v.is_number()) throw ParseError("potential values must be numbers");
        phi.values.push_back(v.get<double>());
    }
    return phi;
}

} // namespace sdmlab
