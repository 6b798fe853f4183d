#include "sdmlab/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "sdmlab/error.hpp"

namespace sdmlab {

namespace {

// Canonical little-endian FNV-1a accumulator, platform independent.
struct Digest {
    uint64_t h = 0xcbf29ce484222325ULL;
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    void i32(int v) { u64(static_cast<uint64_t>(static_cast<int64_t>(v))); }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
};

uint64_t transition_digest(const CsspMdp& mdp) {
    Digest d;
    d.i32(mdp.num_states);
    d.i32(mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s)
        for (size_t j = 0; j < mdp.applicable[s].size(); ++j) {
            d.i32(s);
            d.i32(mdp.applicable[s][j]);
            for (const Outcome& o : mdp.transitions[s][j]) {
                d.i32(o.next);
                d.f64(o.prob);
            }
        }
    return d.h;
}

uint64_t cost_digest(const CsspMdp& mdp) {
    Digest d;
    for (int s = 0; s < mdp.num_states; ++s)
        for (size_t j = 0; j < mdp.applicable[s].size(); ++j)
            for (const Outcome& o : mdp.transitions[s][j]) {
                d.i32(s);
                d.i32(mdp.applicable[s][j]);
                d.i32(o.next);
                d.f64(o.cost);
            }
    return d.h;
}

uint64_t constraint_digest(const CsspMdp& mdp) {
    Digest d;
    d.i32(mdp.num_constraints);
    for (double v : mdp.constraint_values) d.f64(v);
    for (int s = 0; s < mdp.num_states; ++s)
        for (size_t j = 0; j < mdp.applicable[s].size(); ++j)
            for (const Outcome& o : mdp.transitions[s][j]) {
                d.i32(s);
                d.i32(mdp.applicable[s][j]);
                d.i32(o.next);
                for (double x : o.constraint_costs) d.f64(x);
            }
    return d.h;
}

const char* tag_name(ContextTag tag) {
    switch (tag) {
        case ContextTag::initial_state: return "initial_state";
        case ContextTag::goal_state: return "goal_state";
        case ContextTag::transition_id: return "transition_id";
        case ContextTag::cost_id: return "cost_id";
        case ContextTag::constraint_id: return "constraint_id";
    }
    return "?";
}

} // namespace

ContextSpec context_spec_from_names(const std::vector<std::string>& names) {
    ContextSpec spec;
    for (const std::string& n : names) {
        ContextTag tag;
        if (n == "initial_state") tag = ContextTag::initial_state;
        else if (n == "goal_state") tag = ContextTag::goal_state;
        else if (n == "transition_id") tag = ContextTag::transition_id;
        else if (n == "cost_id") tag = ContextTag::cost_id;
        else if (n == "constraint_id") tag = ContextTag::constraint_id;
        else throw Error("unknown context tag \"" + n + "\"");
        if (std::find(spec.tags.begin(), spec.tags.end(), tag) != spec.tags.end())
            throw Error("duplicate context tag \"" + n + "\"");
        spec.tags.push_back(tag);
    }
    return spec;
}

std::vector<std::string> context_spec_names(const ContextSpec& spec) {
    std::vector<std::string> out;
    for (ContextTag t : spec.tags) out.push_back(tag_name(t));
    return out;
}

std::vector<uint64_t> context_of(const CsspMdp& mdp, const ContextSpec& spec) {
    std::vector<uint64_t> out;
    out.reserve(spec.tags.size());
    for (ContextTag tag : spec.tags) {
        switch (tag) {
            case ContextTag::initial_state:
                out.push_back(static_cast<uint64_t>(mdp.initial_state));
                break;
            case ContextTag::goal_state:
                out.push_back(static_cast<uint64_t>(mdp.goal_state));
                break;
            case ContextTag::transition_id: out.push_back(transition_digest(mdp)); break;
            case ContextTag::cost_id: out.push_back(cost_digest(mdp)); break;
            case ContextTag::constraint_id: out.push_back(constraint_digest(mdp)); break;
        }
    }
    return out;
}

// --- KeySpace ---------------------------------------------------------------

KeySpace::KeySpace(const std::vector<CsspMdp>& mdps, const ContextSpec& spec) : spec_(spec) {
    if (mdps.empty()) throw Error("key space needs at least one MDP");
    int m_count = static_cast<int>(mdps.size());

    std::vector<std::vector<uint64_t>> ctx(m_count);
    for (int m = 0; m < m_count; ++m) ctx[m] = context_of(mdps[m], spec);

    // Sorted key -> sharing MDP ordinals. Two states of one MDP never share a
    // key, so members are unique per key.
    std::map<InputKey, std::vector<int>> members;
    for (int m = 0; m < m_count; ++m)
        for (int s : reachable_states(mdps[m]))
            if (s != mdps[m].goal_state) members[InputKey{ctx[m], s}].push_back(m);

    state_to_key_.resize(m_count);
    for (int m = 0; m < m_count; ++m) state_to_key_[m].assign(mdps[m].num_states, -1);
    mdp_slots_.resize(m_count);

    for (auto& [key, who] : members) {
        std::vector<int> acts = mdps[who.front()].applicable[key.state];
        for (size_t i = 1; i < who.size(); ++i) {
            const auto& other = mdps[who[i]].applicable[key.state];
            std::vector<int> kept;
            std::set_intersection(acts.begin(), acts.end(), other.begin(), other.end(),
                                  std::back_inserter(kept));
            acts = std::move(kept);
        }
        if (acts.empty())
            throw Error("MDPs sharing the key at state " + std::to_string(key.state) +
                        " have no applicable action in common");
        int k = static_cast<int>(keys_.size());
        keys_.push_back(key);
        actions_.push_back(std::move(acts));
        for (int m : who) state_to_key_[m][key.state] = k;
    }

    for (int m = 0; m < m_count; ++m) {
        mdp_slots_[m].resize(keys_.size());
        for (int k = 0; k < num_keys(); ++k) {
            int s = keys_[k].state;
            if (state_to_key_[m].size() > static_cast<size_t>(s) && state_to_key_[m][s] == k) {
                auto& slots = mdp_slots_[m][k];
                slots.reserve(actions_[k].size());
                for (int a : actions_[k]) slots.push_back(mdps[m].slot_of(s, a));
            }
        }
    }
}

int KeySpace::find(const InputKey& key) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || !(*it == key)) return -1;
    return static_cast<int>(it - keys_.begin());
}

bool KeySpace::policy_count(uint64_t& out) const {
    uint64_t n = 1;
    for (const auto& acts : actions_)
        if (__builtin_mul_overflow(n, static_cast<uint64_t>(acts.size()), &n)) return false;
    out = n;
    return true;
}

// --- policies ---------------------------------------------------------------

int DeterministicPolicy::action_at(const InputKey& key) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), key,
                               [](const auto& e, const InputKey& k) { return e.first < k; });
    if (it == entries.end() || !(it->first == key))
        throw Error("policy has no entry for state " + std::to_string(key.state));
    return it->second;
}

DeterministicPolicy materialize_policy(const KeySpace& space, const std::vector<int>& slots) {
    if (static_cast<int>(slots.size()) != space.num_keys())
        throw Error("slot assignment length does not match key space");
    DeterministicPolicy p;
    p.context = space.spec();
    p.entries.reserve(slots.size());
    for (int k = 0; k < space.num_keys(); ++k)
        p.entries.push_back({space.key(k), space.key_actions(k)[slots[k]]});
    return p;
}

std::vector<int> compile_policy(const KeySpace& space, const DeterministicPolicy& policy) {
    if (!(policy.context == space.spec()))
        throw Error("policy context spec does not match the key space");
    if (static_cast<int>(policy.entries.size()) != space.num_keys())
        throw Error("policy covers " + std::to_string(policy.entries.size()) + " keys, task has " +
                    std::to_string(space.num_keys()));
    std::vector<int> slots(policy.entries.size());
    for (int k = 0; k < space.num_keys(); ++k) {
        if (!(policy.entries[k].first == space.key(k)))
            throw Error("policy keys do not cover the task's reachable keys");
        const auto& acts = space.key_actions(k);
        auto it = std::find(acts.begin(), acts.end(), policy.entries[k].second);
        if (it == acts.end())
            throw Error("policy picks action " + std::to_string(policy.entries[k].second) +
                        " which is not choosable at state " + std::to_string(space.key(k).state));
        slots[k] = static_cast<int>(it - acts.begin());
    }
    return slots;
}

PolicyIndexer::PolicyIndexer(const KeySpace& space) {
    int n = space.num_keys();
    radix_.resize(n);
    place_.resize(n);
    for (int k = 0; k < n; ++k) radix_[k] = space.key_actions(k).size();
    uint64_t place = 1;
    for (int k = n - 1; k >= 0; --k) {
        place_[k] = place;
        if (__builtin_mul_overflow(place, radix_[k], &place)) {
            overflow_ = true;
            break;
        }
    }
    count_ = place;
}

uint64_t PolicyIndexer::count() const {
    if (overflow_) throw Error("policy space exceeds 2^64, not countable");
    return count_;
}

void PolicyIndexer::decode(uint64_t index, std::vector<int>& slots) const {
    if (overflow_) throw Error("policy space exceeds 2^64, not indexable");
    slots.resize(radix_.size());
    for (size_t k = 0; k < radix_.size(); ++k)
        slots[k] = static_cast<int>((index / place_[k]) % radix_[k]);
}

uint64_t PolicyIndexer::encode(const std::vector<int>& slots) const {
    if (overflow_) throw Error("policy space exceeds 2^64, not indexable");
    uint64_t index = 0;
    for (size_t k = 0; k < radix_.size(); ++k) index += place_[k] * slots[k];
    return index;
}

std::vector<DeterministicPolicy> enumerate_policies(const std::vector<CsspMdp>& mdps,
                                                    const ContextSpec& spec, uint64_t cap) {
    KeySpace space(mdps, spec);
    PolicyIndexer indexer(space);
    if (!indexer.countable())
        throw Error("policy space has more than 2^64 policies, enumeration cap is " +
                    std::to_string(cap));
    uint64_t n = indexer.count();
    if (n > cap)
        throw Error("policy space has " + std::to_string(n) +
                    " policies, exceeds enumeration cap " + std::to_string(cap));
    std::vector<DeterministicPolicy> out;
    out.reserve(n);
    std::vector<int> slots;
    for (uint64_t i = 0; i < n; ++i) {
        indexer.decode(i, slots);
        out.push_back(materialize_policy(space, slots));
    }
    return out;
}

// --- distributions ----------------------------------------------------------

void validate(const ExplicitDistribution& dist) {
    if (!dist.support || dist.support->empty())
        throw Error("explicit distribution needs a nonempty support");
    if (dist.prob.size() != dist.support->size())
        throw Error("explicit distribution has mismatched support and probability sizes");
    double mass = 0.0;
    for (double p : dist.prob) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw Error("explicit distribution probabilities must be nonnegative and finite");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9)
        throw Error("explicit distribution probabilities sum to " + std::to_string(mass));
}

void validate(const FactorizedDistribution& dist) {
    if (!dist.space) throw Error("factorized distribution has no key space");
    if (static_cast<int>(dist.weights.size()) != dist.space->num_keys())
        throw Error("factorized distribution has one weight row per key required");
    for (int k = 0; k < dist.space->num_keys(); ++k) {
        if (dist.weights[k].size() != dist.space->key_actions(k).size())
            throw Error("weight row " + std::to_string(k) + " does not match its action list");
        for (double w : dist.weights[k])
            if (!(w > 0.0) || !std::isfinite(w))
                throw Error("factorized weights must be strictly positive and finite");
    }
}

ExplicitDistribution uniform_distribution(std::vector<DeterministicPolicy> support) {
    if (support.empty()) throw Error("uniform distribution needs a nonempty support");
    ExplicitDistribution dist;
    size_t n = support.size();
    dist.support = std::make_shared<const std::vector<DeterministicPolicy>>(std::move(support));
    dist.prob.assign(n, 1.0 / static_cast<double>(n));
    return dist;
}

FactorizedDistribution uniform_factorized(std::shared_ptr<const KeySpace> space) {
    if (!space) throw Error("uniform factorized distribution needs a key space");
    FactorizedDistribution dist;
    dist.weights.resize(space->num_keys());
    for (int k = 0; k < space->num_keys(); ++k)
        dist.weights[k].assign(space->key_actions(k).size(), 1.0);
    dist.space = std::move(space);
    return dist;
}

std::vector<std::vector<double>> normalized_marginals(const FactorizedDistribution& dist) {
    std::vector<std::vector<double>> out = dist.weights;
    for (auto& row : out) {
        double sum = 0.0;
        for (double w : row) sum += w;
        for (double& w : row) w /= sum;
    }
    return out;
}

DeterministicPolicy sample_policy(const ExplicitDistribution& dist, SeedStream& stream) {
    double mass = 0.0;
    for (double p : dist.prob) mass += p;
    double u = stream.next_double() * mass;
    double acc = 0.0;
    for (size_t i = 0; i < dist.prob.size(); ++i) {
        acc += dist.prob[i];
        if (u < acc) return (*dist.support)[i];
    }
    return dist.support->back();
}

void sample_policy_slots(const FactorizedDistribution& dist, SeedStream& stream,
                         std::vector<int>& slots) {
    int n = dist.space->num_keys();
    slots.resize(n);
    for (int k = 0; k < n; ++k) {
        const auto& row = dist.weights[k];
        double sum = 0.0;
        for (double w : row) sum += w;
        double u = stream.next_double() * sum;
        double acc = 0.0;
        int pick = static_cast<int>(row.size()) - 1;
        for (size_t j = 0; j < row.size(); ++j) {
            acc += row[j];
            if (u < acc) {
                pick = static_cast<int>(j);
                break;
            }
        }
        slots[k] = pick;
    }
}

DeterministicPolicy sample_policy(const FactorizedDistribution& dist, SeedStream& stream) {
    std::vector<int> slots;
    sample_policy_slots(dist, stream, slots);
    return materialize_policy(*dist.space, slots);
}

double similarity(const DeterministicPolicy& a, const DeterministicPolicy& b) {
    if (!(a.context == b.context))
        throw Error("similarity requires policies over the same context spec");
    if (a.entries.size() != b.entries.size())
        throw Error("similarity requires policies over the same key set");
    size_t n = a.entries.size();
    if (n == 0) return 1.0;
    size_t agree = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!(a.entries[i].first == b.entries[i].first))
            throw Error("similarity requires policies over the same key set");
        if (a.entries[i].second == b.entries[i].second) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(n);
}

double policy_probability(const FactorizedDistribution& dist, const DeterministicPolicy& policy) {
    std::vector<int> slots = compile_policy(*dist.space, policy);
    double p = 1.0;
    for (size_t k = 0; k < slots.size(); ++k) {
        const auto& row = dist.weights[k];
        double sum = 0.0;
        for (double w : row) sum += w;
        p *= row[slots[k]] / sum;
    }
    return p;
}

double policy_probability(const ExplicitDistribution& dist, const DeterministicPolicy& policy) {
    double p = 0.0;
    for (size_t i = 0; i < dist.support->size(); ++i)
        if ((*dist.support)[i] == policy) p += dist.prob[i];
    return p;
}

// --- JSON -------------------------------------------------------------------

namespace {

using nlohmann::json;

json key_to_json(const InputKey& key) {
    return json{{"state", key.state}, {"context", key.context}};
}

InputKey key_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("state") || !doc.contains("context"))
        throw ParseError("policy keys must be {state, context} objects");
    InputKey key;
    if (!doc["state"].is_number_integer()) throw ParseError("key state must be an integer");
    key.state = doc["state"].get<int>();
    if (!doc["context"].is_array()) throw ParseError("key context must be an array");
    for (const json& v : doc["context"]) {
        if (!v.is_number_unsigned() && !v.is_number_integer())
            throw ParseError("key context values must be integers");
        key.context.push_back(v.get<uint64_t>());
    }
    return key;
}

} // namespace

nlohmann::json policy_to_json(const DeterministicPolicy& policy) {
    json doc = json::array();
    for (const auto& [key, action] : policy.entries)
        doc.push_back({{"key", key_to_json(key)}, {"action", action}});
    return doc;
}

DeterministicPolicy policy_from_json(const nlohmann::json& doc, const ContextSpec& spec) {
    if (!doc.is_array()) throw ParseError("a policy document is an array of {key, action}");
    DeterministicPolicy p;
    p.context = spec;
    for (const json& entry : doc) {
        if (!entry.is_object() || !entry.contains("key") || !entry.contains("action"))
            throw ParseError("policy entries must be {key, action} objects");
        if (!entry["action"].is_number_integer())
            throw ParseError("policy actions must be integers");
        InputKey key = key_from_json(entry["key"]);
        if (key.context.size() != spec.tags.size())
            throw Error("policy key context length does not match the task's context spec");
        p.entries.push_back({std::move(key), entry["action"].get<int>()});
    }
    std::sort(p.entries.begin(), p.entries.end());
    for (size_t i = 1; i < p.entries.size(); ++i)
        if (p.entries[i].first == p.entries[i - 1].first)
            throw Error("policy document lists the same key twice");
    return p;
}

nlohmann::json explicit_to_json(const ExplicitDistribution& dist) {
    json policies = json::array();
    for (const DeterministicPolicy& p : *dist.support) policies.push_back(policy_to_json(p));
    return json{{"policies", std::move(policies)}, {"probs", dist.prob}};
}

ExplicitDistribution explicit_from_json(const nlohmann::json& doc, const ContextSpec& spec) {
    if (!doc.is_object() || !doc.contains("policies") || !doc.contains("probs"))
        throw ParseError("explicit distributions are {policies, probs} objects");
    std::vector<DeterministicPolicy> support;
    for (const json& p : doc["policies"]) support.push_back(policy_from_json(p, spec));
    ExplicitDistribution dist;
    dist.support = std::make_shared<const std::vector<DeterministicPolicy>>(std::move(support));
    if (!doc["probs"].is_array()) throw ParseError("\"probs\" must be an array");
    for (const json& v : doc["probs"]) {
        if (!v.is_number()) throw ParseError("probabilities must be numbers");
        dist.prob.push_back(v.get<double>());
    }
    validate(dist);
    return dist;
}

nlohmann::json factorized_to_json(const FactorizedDistribution& dist) {
    json keys = json::array();
    json actions = json::array();
    for (int k = 0; k < dist.space->num_keys(); ++k) {
        keys.push_back(key_to_json(dist.space->key(k)));
        actions.push_back(dist.space->key_actions(k));
    }
    return json{{"keys", std::move(keys)}, {"actions", std::move(actions)},
                {"weights", dist.weights}};
}

FactorizedDistribution factorized_from_json(const nlohmann::json& doc,
                                            const std::vector<CsspMdp>& mdps,
                                            const ContextSpec& spec) {
    if (!doc.is_object() || !doc.contains("keys") || !doc.contains("weights"))
        throw ParseError("factorized distributions are {keys, actions, weights} objects");
    FactorizedDistribution dist;
    auto space = std::make_shared<KeySpace>(mdps, spec);
    const json& keys = doc["keys"];
    if (!keys.is_array() || static_cast<int>(keys.size()) != space->num_keys())
        throw Error("factorized distribution keys do not match the task's reachable keys");
    for (int k = 0; k < space->num_keys(); ++k)
        if (!(key_from_json(keys[k]) == space->key(k)))
            throw Error("factorized distribution keys do not match the task's reachable keys");
    const json& weights = doc["weights"];
    if (!weights.is_array() || static_cast<int>(weights.size()) != space->num_keys())
        throw ParseError("\"weights\" must have one row per key");
    dist.weights.resize(space->num_keys());
    for (int k = 0; k < space->num_keys(); ++k) {
        if (!weights[k].is_array()) throw ParseError("weight rows must be arrays");
        for (const json& w : weights[k]) {
            if (!w.is_number()) throw ParseError("weights must be numbers");
            dist.weights[k].push_back(w.get<double>());
        }
    }
    dist.space = std::move(space);
    validate(dist);
    return dist;
}

} // namespace sdmlab
