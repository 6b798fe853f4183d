#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sdmlab/mdp.hpp"
#include "sdmlab/rng.hpp"

namespace sdmlab {

/// Default ceiling on materialized policy enumeration.
constexpr uint64_t kEnumerationCap = 1'000'000;

/// Which task elements a policy is allowed to condition on, beyond the
/// current state. Tags are unique and their order fixes the context layout.
enum class ContextTag { initial_state, goal_state, transition_id, cost_id, constraint_id };

struct ContextSpec {
    std::vector<ContextTag> tags;
    bool operator==(const ContextSpec&) const = default;
};

/// Parse/print tag names ("initial_state", ...). Throws Error on unknown
/// names or duplicates.
ContextSpec context_spec_from_names(const std::vector<std::string>& names);
std::vector<std::string> context_spec_names(const ContextSpec& spec);

/// Context tuple of one MDP under a spec. Initial/goal tags contribute the
/// raw state index; structural tags contribute a stable 64-bit digest of the
/// tagged element (FNV-1a over its canonical bytes), so equal elements give
/// equal values on every platform.
std::vector<uint64_t> context_of(const CsspMdp& mdp, const ContextSpec& spec);

/// Policy input: context tuple plus current state. Ordering is lexicographic
/// on (context, state), which fixes enumeration and serialization order.
struct InputKey {
    std::vector<uint64_t> context;
    int state = 0;
    auto operator<=>(const InputKey&) const = default;
};

/**
 * The joint key space of an MDP set under one context spec.
 *
 * Each MDP contributes one key per reachable non-goal state; MDPs with equal
 * context tuples share keys. The action list at a shared key is the
 * intersection of the applicable sets of every sharing MDP (an empty
 * intersection is an error: no policy could act there in all of them).
 * Keys are sorted; per-MDP tables map states back to keys and key-action
 * slots to the MDP's own transition rows. The tables are positional, so
 * evaluation must pass the same MDP list the space was built from.
 */
class KeySpace {
  public:
    KeySpace(const std::vector<CsspMdp>& mdps, const ContextSpec& spec);

    const ContextSpec& spec() const { return spec_; }
    int num_mdps() const { return static_cast<int>(state_to_key_.size()); }
    int num_keys() const { return static_cast<int>(keys_.size()); }
    const InputKey& key(int k) const { return keys_[k]; }
    const std::vector<InputKey>& keys() const { return keys_; }

    /// Action ids choosable at key k (nonempty, strictly increasing).
    const std::vector<int>& key_actions(int k) const { return actions_[k]; }

    /// Key index of state s in MDP m, or -1 (goal / unreachable state).
    int key_of_state(int m, int s) const { return state_to_key_[m][s]; }

    /// Row slot within mdp m's applicable list for the j-th action of key k.
    /// Only valid when key k belongs to m.
    int mdp_slot(int m, int k, int j) const { return mdp_slots_[m][k][j]; }

    bool has_key(int m, int k) const { return !mdp_slots_[m][k].empty(); }

    /// Index of an exact key, or -1.
    int find(const InputKey& key) const;

    /// Number of deterministic policies (product of action counts).
    /// Returns false when the product overflows 64 bits.
    bool policy_count(uint64_t& out) const;

  private:
    ContextSpec spec_;
    std::vector<InputKey> keys_;
    std::vector<std::vector<int>> actions_;
    std::vector<std::vector<int>> state_to_key_;        // [mdp][state] -> key or -1
    std::vector<std::vector<std::vector<int>>> mdp_slots_; // [mdp][key][j] -> row slot
};

/**
 * Total deterministic policy: one applicable action per key. Entries are
 * sorted by key. The context spec travels with the policy so it can be
 * applied to any MDP by recomputing that MDP's context tuple.
 */
struct DeterministicPolicy {
    ContextSpec context;
    std::vector<std::pair<InputKey, int>> entries;

    /// Action at a key; throws Error when the key is not covered.
    int action_at(const InputKey& key) const;

    bool operator==(const DeterministicPolicy&) const = default;
};

/// Build the policy for one slot assignment (slots[k] indexes into
/// key_actions(k)).
DeterministicPolicy materialize_policy(const KeySpace& space, const std::vector<int>& slots);

/// Inverse of materialize_policy. Throws Error when the policy's keys do not
/// cover the space exactly or an action is not choosable at its key.
std::vector<int> compile_policy(const KeySpace& space, const DeterministicPolicy& policy);

/**
 * Mixed-radix bijection between policy indices and slot assignments, in
 * lexicographic order (last key varies fastest). Lets enumeration-scale
 * sweeps walk policy spaces far too large to materialize.
 */
class PolicyIndexer {
  public:
    explicit PolicyIndexer(const KeySpace& space);

    bool countable() const { return !overflow_; }
    uint64_t count() const; // throws Error when not countable
    void decode(uint64_t index, std::vector<int>& slots) const;
    uint64_t encode(const std::vector<int>& slots) const;

  private:
    std::vector<uint64_t> radix_;
    std::vector<uint64_t> place_;
    uint64_t count_ = 1;
    bool overflow_ = false;
};

/// All policies over the reachable keys of the MDP set, lexicographically.
/// Throws Error (reporting the exact count) when the space exceeds `cap`.
std::vector<DeterministicPolicy> enumerate_policies(const std::vector<CsspMdp>& mdps,
                                                    const ContextSpec& spec,
                                                    uint64_t cap = kEnumerationCap);

/// Distribution with materialized support. probs align with support; they are
/// nonnegative and sum to 1 within 1e-9.
struct ExplicitDistribution {
    std::shared_ptr<const std::vector<DeterministicPolicy>> support;
    std::vector<double> prob;
};

/// Product-form distribution: independent action weights per key. Weights
/// are strictly positive and finite; P(pi) is the product over keys of the
/// normalized weight of the chosen action.
struct FactorizedDistribution {
    std::shared_ptr<const KeySpace> space;
    std::vector<std::vector<double>> weights;
};

/// Throw Error if the distribution breaks its invariants.
void validate(const ExplicitDistribution& dist);
void validate(const FactorizedDistribution& dist);

/// Uniform explicit distribution over the given (nonempty) support.
ExplicitDistribution uniform_distribution(std::vector<DeterministicPolicy> support);

/// Uniform factorized distribution (weight 1 everywhere) over a key space.
FactorizedDistribution uniform_factorized(std::shared_ptr<const KeySpace> space);

/// Per-key normalized weights of a factorized distribution.
std::vector<std::vector<double>> normalized_marginals(const FactorizedDistribution& dist);

/// Draw one policy. Explicit: cumulative mass. Factorized: one independent
/// draw per key. Both consume a deterministic amount of stream state.
DeterministicPolicy sample_policy(const ExplicitDistribution& dist, SeedStream& stream);
DeterministicPolicy sample_policy(const FactorizedDistribution& dist, SeedStream& stream);

/// Slot-level sampling used by the kernels (no policy materialization).
void sample_policy_slots(const FactorizedDistribution& dist, SeedStream& stream,
                         std::vector<int>& slots);

/// Fraction of keys on which the two policies agree. Requires identical key
/// sets and context specs; empty key sets give 1.
double similarity(const DeterministicPolicy& a, const DeterministicPolicy& b);

/// Probability mass the distribution puts on exactly this policy.
double policy_probability(const FactorizedDistribution& dist, const DeterministicPolicy& policy);
double policy_probability(const ExplicitDistribution& dist, const DeterministicPolicy& policy);

// --- JSON -------------------------------------------------------------------
//
// Policy:      [{"key": {"state": s, "context": [u,...]}, "action": a}, ...]
// Explicit:    {"policies": [<policy>, ...], "probs": [...]}
// Factorized:  {"keys": [{"state","context"}, ...], "actions": [[...], ...],
//               "weights": [[...], ...]}
// Policies do not embed their context spec; loading one takes the spec from
// the surrounding task bundle.

nlohmann::json policy_to_json(const DeterministicPolicy& policy);
DeterministicPolicy policy_from_json(const nlohmann::json& doc, const ContextSpec& spec);

nlohmann::json explicit_to_json(const ExplicitDistribution& dist);
ExplicitDistribution explicit_from_json(const nlohmann::json& doc, const ContextSpec& spec);

nlohmann::json factorized_to_json(const FactorizedDistribution& dist);
/// Rebuilds the key space from the given MDP set and checks it matches the
/// document's keys exactly.
FactorizedDistribution factorized_from_json(const nlohmann::json& doc,
                                            const std::vector<CsspMdp>& mdps,
                                            const ContextSpec& spec);

} // namespace sdmlab
