#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "network.hpp"
#include "protocol.hpp"
#include "rng.hpp"

namespace singmis {

using StateMap = std::map<AgentId, AgentState>;

// Test hook: supply a deterministic ell for (agent, round) instead of
// sampling.  Production paths always sample.
using ForcedEll = std::function<std::optional<Ell>(AgentId, int)>;

inline int default_round_budget(std::size_t n) {
    return 64 * static_cast<int>(std::ceil(std::log2(static_cast<double>(n) + 1.0))) + 64;
}

struct SyncConfig {
    Variant variant = Variant::Singing;
    HearingMode hearing = HearingMode::Plain;
    bool allow_unsafe_pairing = false;
    std::uint64_t seed = 0;
    double coin_bias = 0.5;   // probability a coin flip prolongs the ell draw
    int max_rounds = 0;       // 0 -> default_round_budget(n)
    bool record_rounds = true;

    // Restart sampling: ell draws for rounds strictly after branch_after_round
    // come from branch_seed, so many i.i.d. continuations of one reached
    // configuration can be generated by re-running with different branch
    // seeds.
    int branch_after_round = -1;
    std::uint64_t branch_seed = 0;

    ForcedEll forced_ell;
};

struct AgentRound {
    AgentState state = AgentState::Un;
    Ell ell = 1;
    HeardNotes heard;  // restricted to the listen set
    AgentState next = AgentState::Un;
};

struct RoundRecord {
    int round = 1;
    Network net;  // after this round's change events
    std::set<AgentId> changed;
    std::set<Edge> affected;
    std::map<AgentId, AgentRound> agents;
    long long active_edges = 0;
    int num_un = 0, num_in = 0, num_out = 0;
    bool state_changed = false;
};

struct RoundSummary {
    int round = 1;
    long long active_edges = 0;
    std::size_t affected = 0;
    int num_un = 0, num_in = 0, num_out = 0;
};

enum class StopReason { Converged, BudgetExhausted };

struct Trace {
    Variant variant = Variant::Singing;
    HearingMode hearing = HearingMode::Plain;
    std::uint64_t seed = 0;
    Network initial_net;
    StateMap initial_states;
    std::vector<RoundRecord> rounds;     // empty when record_rounds is off
    std::vector<RoundSummary> summary;
    Network final_net;
    StateMap final_states;
    StopReason stop = StopReason::BudgetExhausted;
    int rounds_run = 0;
};

// A valid MIS state: nobody undecided, the In set independent, every Out
// agent dominated by an In neighbor.
inline bool is_converged(const Network& net, const StateMap& states) {
    for (const auto& [id, s] : states) {
        if (s == AgentState::Un) return false;
        bool in_nbr = false;
        for (AgentId v : net.neighbors(id))
            if (states.at(v) == AgentState::In) {
                in_nbr = true;
                break;
            }
        if (s == AgentState::In && in_nbr) return false;   // not independent
        if (s == AgentState::Out && !in_nbr) return false;  // not maximal
    }
    return true;
}

namespace detail {

struct IndexedGraph {
    std::vector<AgentId> ids;
    std::map<AgentId, int> index;
    std::vector<std::vector<int>> adj;

    void rebuild(const Network& net) {
        ids = net.agents();
        index.clear();
        for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<int>(i);
        adj.assign(ids.size(), {});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& nbrs = net.neighbors(ids[i]);
            adj[i].reserve(nbrs.size());
            for (AgentId v : nbrs) adj[i].push_back(index.at(v));
        }
    }
};

constexpr std::uint64_t kEllTag = 0x656c6cull;

}  // namespace detail

inline Trace run_sync(const Network& start_net, const StateMap& init_states,
                      const ChangeScript& script, const SyncConfig& cfg) {
    if (!cfg.allow_unsafe_pairing && !pairing_is_safe(cfg.variant, cfg.hearing))
        throw std::invalid_argument(
            "unsafe variant/hearing pairing; pass allow_unsafe_pairing to run it anyway");
    for (AgentId id : start_net.agents())
        if (!init_states.count(id))
            throw std::invalid_argument("initial state missing for agent " + std::to_string(id));
    const int max_rounds =
        cfg.max_rounds > 0 ? cfg.max_rounds : default_round_budget(start_net.agent_count());

    Trace trace;
    trace.variant = cfg.variant;
    trace.hearing = cfg.hearing;
    trace.seed = cfg.seed;
    trace.initial_net = start_net;
    trace.initial_states = init_states;

    Network net = start_net;
    StateMap states = init_states;
    std::set<AgentId> retired;

    detail::IndexedGraph g;
    g.rebuild(net);

    std::vector<AgentState> s;
    std::vector<Ell> ell;
    std::vector<SungNotes> sung;
    std::vector<AgentState> next;
    std::vector<char> in_nbr, lonely_in, elim;

    for (int round = 1; round <= max_rounds; ++round) {
        std::set<AgentId> changed;
        std::set<Edge> affected;
        auto events = script.events_for(round);
        if (!events.empty()) {
            Network before = net;
            ChangeResult res = apply_changes(net, events, &retired);
            for (AgentId id : res.removed_agents) {
                states.erase(id);
                retired.insert(id);
            }
            for (const auto& [id, st] : res.added_states) states[id] = st;
            changed = std::move(res.changed);
            affected = affected_edges(graph_union(before, net), changed);
            g.rebuild(net);
        }

        const std::size_t n = g.ids.size();
        s.resize(n);
        ell.resize(n);
        sung.resize(n);
        next.resize(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = states.at(g.ids[i]);

        const std::uint64_t ell_seed =
            (cfg.branch_after_round >= 0 && round > cfg.branch_after_round) ? cfg.branch_seed
                                                                           : cfg.seed;
        for (std::size_t i = 0; i < n; ++i) {
            std::optional<Ell> forced =
                cfg.forced_ell ? cfg.forced_ell(g.ids[i], round) : std::nullopt;
            if (forced) {
                ell[i] = *forced;
            } else {
                CounterRng rng{ell_seed, static_cast<std::uint64_t>(g.ids[i]),
                               static_cast<std::uint64_t>(round), detail::kEllTag};
                ell[i] = sample_ell(rng, cfg.coin_bias);
            }
            sung[i] = sing_notes(s[i], ell[i], cfg.variant);
        }

        RoundRecord rec;
        bool any_change = false;
        for (std::size_t i = 0; i < n; ++i) {
            const ListenSet ls = listen_set(s[i], ell[i], cfg.variant);
            HeardNotes heard;
            for (int k = 0; k < ls.count; ++k) {
                const Note note = ls.notes[k];
                if (cfg.hearing == HearingMode::SelfJamming && sung[i].contains(note)) continue;
                for (int j : g.adj[i])
                    if (sung[j].contains(note)) {
                        heard.add(note);
                        break;
                    }
            }
            next[i] = transition(s[i], ell[i], heard, cfg.variant);
            if (next[i] != s[i]) any_change = true;
            if (cfg.record_rounds) rec.agents[g.ids[i]] = {s[i], ell[i], heard, next[i]};
        }

        // Active/eliminated bookkeeping for this round's states.
        in_nbr.assign(n, 0);
        lonely_in.assign(n, 0);
        elim.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (int j : g.adj[i])
                if (s[j] == AgentState::In) {
                    in_nbr[i] = 1;
                    break;
                }
        for (std::size_t i = 0; i < n; ++i)
            lonely_in[i] = s[i] == AgentState::In && !in_nbr[i];
        for (std::size_t i = 0; i < n; ++i) {
            elim[i] = lonely_in[i];
            if (!elim[i])
                for (int j : g.adj[i])
                    if (lonely_in[j]) {
                        elim[i] = 1;
                        break;
                    }
        }
        long long active_edges = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (int j : g.adj[i])
                if (static_cast<int>(i) < j && !elim[i] && !elim[j]) ++active_edges;

        RoundSummary sum;
        sum.round = round;
        sum.active_edges = active_edges;
        sum.affected = affected.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] == AgentState::Un) ++sum.num_un;
            else if (s[i] == AgentState::In) ++sum.num_in;
            else ++sum.num_out;
        }
        trace.summary.push_back(sum);

        if (cfg.record_rounds) {
            rec.round = round;
            rec.net = net;
            rec.changed = std::move(changed);
            rec.affected = std::move(affected);
            rec.active_edges = active_edges;
            rec.num_un = sum.num_un;
            rec.num_in = sum.num_in;
            rec.num_out = sum.num_out;
            rec.state_changed = any_change;
            trace.rounds.push_back(std::move(rec));
        }

        for (std::size_t i = 0; i < n; ++i) states[g.ids[i]] = next[i];
        trace.rounds_run = round;

        if (round >= script.last_round() && is_converged(net, states)) {
            // The self-jamming variant keeps competing inside the In set, so
            // only a round that changed nothing certifies convergence.
            if (cfg.variant == Variant::Singing || !any_change) {
                trace.stop = StopReason::Converged;
                break;
            }
        }
    }

    trace.final_net = std::move(net);
    trace.final_states = std::move(states);
    return trace;
}

inline StateMap all_un(const Network& net) {
    StateMap m;
    for (AgentId id : net.agents()) m[id] = AgentState::Un;
    return m;
}

}  // namespace singmis
