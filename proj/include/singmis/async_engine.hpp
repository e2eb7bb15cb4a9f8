#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "network.hpp"
#include "protocol.hpp"
#include "rng.hpp"
#include "sync_engine.hpp"

namespace singmis {

using Tick = std::int64_t;

struct TimingParams {
    Tick t_min = 4;
    Tick t_max = 8;
    Tick delta_max = 2;

    void validate() const {
        if (t_min <= 0 || t_max <= 0 || delta_max <= 0)
            throw std::invalid_argument("timing params must be positive integers");
        if (t_min > t_max) throw std::invalid_argument("timing params need t_min <= t_max");
        if (2 * delta_max > t_min)
            throw std::invalid_argument("timing params violate 2*delta_max <= t_min");
    }
};

enum class DurationPolicy { Fixed, UniformRandom, Scripted };
enum class DelayPolicy { Fixed, UniformRandom, Scripted };

struct SchedulePolicy {
    DurationPolicy duration_kind = DurationPolicy::UniformRandom;
    Tick fixed_duration = 0;
    std::function<Tick(AgentId, int)> scripted_duration;

    DelayPolicy delay_kind = DelayPolicy::UniformRandom;
    // A fixed delay of 0 is accepted (outside the model's 0 < delta
    // requirement) purely so a fixed-duration, common-start schedule
    // reproduces the synchronous engine tick-for-tick.
    Tick fixed_delay = 0;
    std::function<Tick(AgentId, AgentId, int)> scripted_delay;

    std::map<AgentId, Tick> start_times;  // absent agents start at tick 0

    Tick start_of(AgentId id) const {
        auto it = start_times.find(id);
        return it == start_times.end() ? 0 : it->second;
    }
};

inline SchedulePolicy synchronous_schedule(Tick duration, Tick delay = 0) {
    SchedulePolicy p;
    p.duration_kind = DurationPolicy::Fixed;
    p.fixed_duration = duration;
    p.delay_kind = DelayPolicy::Fixed;
    p.fixed_delay = delay;
    return p;
}

struct AsyncConfig {
    Variant variant = Variant::Singing;
    HearingMode hearing = HearingMode::Plain;
    bool allow_unsafe_pairing = false;
    std::uint64_t seed = 0;
    double coin_bias = 0.5;
    Tick horizon = 0;

    // Restart sampling at a tick: ell draws for rounds starting at or after
    // branch_after_tick come from branch_seed.  Durations and delays stay on
    // the base seed so the realized schedule is common to all branches.
    Tick branch_after_tick = -1;
    std::uint64_t branch_seed = 0;

    ForcedEll forced_ell;  // (agent, round index)
};

struct AsyncRoundRec {
    AgentId agent = 0;
    int index = 0;
    Tick start = 0, end = 0;
    AgentState state = AgentState::Un;
    Ell ell = 1;
    HeardNotes heard;
    AgentState next = AgentState::Un;
};

struct AsyncTrace {
    Variant variant = Variant::Singing;
    HearingMode hearing = HearingMode::Plain;
    TimingParams params;
    SchedulePolicy policy;
    std::uint64_t seed = 0;
    Tick horizon = 0;
    Network net;
    StateMap initial_states;
    std::map<AgentId, std::vector<AsyncRoundRec>> rounds;  // completed rounds, by index
    StateMap final_states;
    bool quiesced = false;
    Tick last_tick = 0;  // last processed round boundary
};

namespace detail {

constexpr std::uint64_t kDurTag = 0x647572ull;
constexpr std::uint64_t kDelayTag = 0x646c79ull;

inline Tick draw_duration(const SchedulePolicy& pol, const TimingParams& tp, std::uint64_t seed,
                          AgentId v, int index) {
    Tick d = 0;
    switch (pol.duration_kind) {
        case DurationPolicy::Fixed: d = pol.fixed_duration; break;
        case DurationPolicy::UniformRandom: {
            CounterRng rng{seed, kDurTag, static_cast<std::uint64_t>(v),
                           static_cast<std::uint64_t>(index)};
            d = rng.between(tp.t_min, tp.t_max);
            break;
        }
        case DurationPolicy::Scripted:
            if (!pol.scripted_duration)
                throw std::invalid_argument("scripted duration policy without a script");
            d = pol.scripted_duration(v, index);
            break;
    }
    if (d < tp.t_min || d > tp.t_max)
        throw std::invalid_argument("round duration " + std::to_string(d) +
                                    " outside [t_min, t_max]");
    return d;
}

inline Tick draw_delay(const SchedulePolicy& pol, const TimingParams& tp, std::uint64_t seed,
                       AgentId u, AgentId v, int index) {
    Tick d = 0;
    switch (pol.delay_kind) {
        case DelayPolicy::Fixed: d = pol.fixed_delay; break;
        case DelayPolicy::UniformRandom: {
            CounterRng rng{seed, kDelayTag, static_cast<std::uint64_t>(u),
                           static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(index)};
            d = rng.between(1, tp.delta_max);
            break;
        }
        case DelayPolicy::Scripted:
            if (!pol.scripted_delay)
                throw std::invalid_argument("scripted delay policy without a script");
            d = pol.scripted_delay(u, v, index);
            break;
    }
    const bool zero_ok = pol.delay_kind == DelayPolicy::Fixed;
    if (d > tp.delta_max || d < 0 || (d == 0 && !zero_ok))
        throw std::invalid_argument("transmission delay " + std::to_string(d) +
                                    " outside (0, delta_max]");
    return d;
}

// Audible interval of (u,i) toward v is [start_u + delta, end_u + delta],
// closed: a note reaching v exactly at end_v still counts ("by time
// t_{v,j+1}").  (v,j) listens over (start_v, end_v].  The out-of-model
// delta = 0 keeps the arrival strict so a round never hears a round that
// starts at the very tick it ends.
inline bool intervals_hear(Tick start_u, Tick end_u, Tick delta, Tick start_v, Tick end_v) {
    const Tick arrive = start_u + delta;
    if (delta == 0 ? arrive >= end_v : arrive > end_v) return false;
    return end_u + delta > start_v;
}

}  // namespace detail

inline Tick transmission_delay(const AsyncTrace& trace, AgentId u, AgentId v, int index) {
    return detail::draw_delay(trace.policy, trace.params, trace.seed, u, v, index);
}

inline AsyncTrace run_async(const Network& net, const StateMap& init_states,
                            const TimingParams& params, const SchedulePolicy& policy,
                            const AsyncConfig& cfg) {
    params.validate();
    if (!cfg.allow_unsafe_pairing && !pairing_is_safe(cfg.variant, cfg.hearing))
        throw std::invalid_argument(
            "unsafe variant/hearing pairing; pass allow_unsafe_pairing to run it anyway");
    if (cfg.horizon < params.t_max)
        throw std::invalid_argument("horizon must be at least t_max");
    for (AgentId id : net.agents())
        if (!init_states.count(id))
            throw std::invalid_argument("initial state missing for agent " + std::to_string(id));

    AsyncTrace trace;
    trace.variant = cfg.variant;
    trace.hearing = cfg.hearing;
    trace.params = params;
    trace.policy = policy;
    trace.seed = cfg.seed;
    trace.horizon = cfg.horizon;
    trace.net = net;
    trace.initial_states = init_states;

    const std::vector<AgentId> ids = net.agents();
    const std::size_t n = ids.size();
    if (n == 0) {
        trace.quiesced = true;
        return trace;
    }
    std::map<AgentId, int> index;
    for (std::size_t i = 0; i < n; ++i) index[ids[i]] = static_cast<int>(i);
    std::vector<std::vector<int>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (AgentId v : net.neighbors(ids[i])) adj[i].push_back(index.at(v));

    // Round boundaries are independent of protocol state; lay them all out up
    // front.  starts[i] has one entry per boundary, so round j of agent i is
    // (starts[i][j], starts[i][j+1]].
    std::vector<std::vector<Tick>> starts(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tick t = policy.start_of(ids[i]);
        if (t < 0) throw std::invalid_argument("negative start time");
        int j = 0;
        starts[i].push_back(t);
        while (t < cfg.horizon) {
            t += detail::draw_duration(policy, params, cfg.seed, ids[i], j++);
            starts[i].push_back(t);
        }
    }

    auto draw_ell = [&](AgentId id, int round_idx, Tick start) -> Ell {
        if (cfg.forced_ell) {
            auto forced = cfg.forced_ell(id, round_idx);
            if (forced) return *forced;
        }
        const std::uint64_t seed = (cfg.branch_after_tick >= 0 && start >= cfg.branch_after_tick)
                                       ? cfg.branch_seed
                                       : cfg.seed;
        // Keyed by the 1-based round number so a fixed-duration, zero-delay,
        // common-start schedule replays the synchronous engine's exact draws.
        CounterRng rng{seed, static_cast<std::uint64_t>(id),
                       static_cast<std::uint64_t>(round_idx) + 1, detail::kEllTag};
        return sample_ell(rng, cfg.coin_bias);
    };

    std::vector<AgentState> cur_state(n);
    std::vector<Ell> cur_ell(n);
    std::vector<int> cur_index(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        cur_state[i] = init_states.at(ids[i]);
        cur_ell[i] = draw_ell(ids[i], 0, starts[i][0]);
        trace.rounds[ids[i]];
    }

    // (end tick, agent) of each agent's in-progress round; ends processed in
    // tick order, ties by agent id, which keeps every audible neighbor round
    // already materialized when a round closes.
    using Ev = std::pair<Tick, int>;
    std::priority_queue<Ev, std::vector<Ev>, std::greater<>> queue;
    for (std::size_t i = 0; i < n; ++i) queue.emplace(starts[i][1], static_cast<int>(i));

    auto round_info = [&](int u, int j) -> std::pair<AgentState, Ell> {
        if (j == cur_index[u]) return {cur_state[u], cur_ell[u]};
        const auto& rec = trace.rounds.at(ids[u])[j];
        return {rec.state, rec.ell};
    };

    Tick last_change = 0;
    while (!queue.empty()) {
        auto [end, vi] = queue.top();
        queue.pop();
        const AgentId v = ids[vi];
        const int j = cur_index[vi];
        const Tick start = starts[vi][j];
        const AgentState s = cur_state[vi];
        const Ell ell = cur_ell[vi];
        const SungNotes own = sing_notes(s, ell, cfg.variant);

        HeardNotes heard;
        const ListenSet ls = listen_set(s, ell, cfg.variant);
        for (int k = 0; k < ls.count; ++k) {
            const Note note = ls.notes[k];
            if (cfg.hearing == HearingMode::SelfJamming && own.contains(note)) continue;
            bool got = false;
            for (int u : adj[vi]) {
                // Candidate rounds of u: audible interval must overlap
                // (start, end], so end_u > start - delta_max and start_u < end.
                const auto& su = starts[u];
                auto it = std::upper_bound(su.begin(), su.end(), start - params.delta_max);
                int i0 = std::max(0, static_cast<int>(it - su.begin()) - 1);
                for (int i = i0; i + 1 < static_cast<int>(su.size()) && su[i] < end; ++i) {
                    if (i > cur_index[u]) break;  // not started yet, inaudible
                    const Tick delta = detail::draw_delay(policy, params, cfg.seed, ids[u], v, i);
                    if (!detail::intervals_hear(su[i], su[i + 1], delta, start, end)) continue;
                    auto [us, uell] = round_info(u, i);
                    if (sing_notes(us, uell, cfg.variant).contains(note)) {
                        got = true;
                        break;
                    }
                }
                if (got) break;
            }
            if (got) heard.add(note);
        }

        const AgentState next = transition(s, ell, heard, cfg.variant);
        trace.rounds[v].push_back({v, j, start, end, s, ell, heard, next});
        if (next != s) last_change = end;
        trace.last_tick = end;

        cur_state[vi] = next;
        cur_index[vi] = j + 1;
        if (j + 2 < static_cast<int>(starts[vi].size())) {
            cur_ell[vi] = draw_ell(v, j + 1, starts[vi][j + 1]);
            queue.emplace(starts[vi][j + 2], vi);
        }

        // Quiescence: settled states and a full window with every lingering
        // transmission delivered and nothing changing.
        if (end - last_change >= params.t_max + params.delta_max) {
            StateMap now;
            for (std::size_t i = 0; i < n; ++i) now[ids[i]] = cur_state[i];
            if (is_converged(net, now)) {
                trace.quiesced = true;
                break;
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) trace.final_states[ids[i]] = cur_state[i];
    return trace;
}

// State in effect during [start, next start); at a boundary the committed
// transition has already taken place.
inline AgentState state_at(const AsyncTrace& trace, AgentId v, Tick t) {
    const auto& recs = trace.rounds.at(v);
    if (recs.empty() || t < recs.front().start) return trace.initial_states.at(v);
    if (t >= recs.back().end) return recs.back().next;
    auto it = std::upper_bound(recs.begin(), recs.end(), t,
                               [](Tick tt, const AsyncRoundRec& r) { return tt < r.start; });
    return (it - 1)->state;
}

inline StateMap states_at(const AsyncTrace& trace, Tick t) {
    StateMap m;
    for (const auto& [id, _] : trace.rounds) m[id] = state_at(trace, id, t);
    return m;
}

// Paper relation: does (v,j) hear (u,i)?  With sj_relation the states must
// also match (the self-jamming analysis refines the relation this way).
inline bool hears_from(const AsyncTrace& trace, AgentId u, int i, AgentId v, int j,
                       bool sj_relation = false) {
    if (!trace.net.has_edge(u, v)) throw std::invalid_argument("hears_from: agents not adjacent");
    const auto& ur = trace.rounds.at(u);
    const auto& vr = trace.rounds.at(v);
    if (i < 0 || i >= static_cast<int>(ur.size()) || j < 0 || j >= static_cast<int>(vr.size()))
        throw std::invalid_argument("hears_from: round not in trace");
    const Tick delta = transmission_delay(trace, u, v, i);
    if (!detail::intervals_hear(ur[i].start, ur[i].end, delta, vr[j].start, vr[j].end))
        return false;
    return !sj_relation || ur[i].state == vr[j].state;
}

struct RoundRef {
    AgentId agent = 0;
    int index = 0;
    auto operator<=>(const RoundRef&) const = default;
};

// Rounds (u,i) that (v,j) hears from under the SJ analysis relation.
inline std::vector<RoundRef> sj_hear_set(const AsyncTrace& trace, AgentId v, int j) {
    std::vector<RoundRef> out;
    const auto& vr = trace.rounds.at(v).at(j);
    for (AgentId u : trace.net.neighbors(v)) {
        const auto& ur = trace.rounds.at(u);
        for (int i = 0; i < static_cast<int>(ur.size()); ++i) {
            if (ur[i].start >= vr.end) break;
            if (ur[i].end + trace.params.delta_max <= vr.start) continue;
            if (hears_from(trace, u, i, v, j, true)) out.push_back({u, i});
        }
    }
    return out;
}

// Def. 9: mutual SJ-hearing, equal states, equal ell, and each ell at least
// the loudest value audible to that round.
inline std::vector<std::pair<RoundRef, RoundRef>> detect_collisions(const AsyncTrace& trace) {
    if (trace.variant != Variant::SelfJamming)
        throw std::invalid_argument("collisions are defined only for self-jamming traces");
    std::map<RoundRef, Ell> loudest;  // M(v,j); absent means Hear(v,j) empty
    std::map<RoundRef, std::vector<RoundRef>> hear;
    for (const auto& [v, recs] : trace.rounds)
        for (int j = 0; j < static_cast<int>(recs.size()); ++j) {
            auto hs = sj_hear_set(trace, v, j);
            Ell m = 0;
            for (const auto& r : hs) m = std::max(m, trace.rounds.at(r.agent)[r.index].ell);
            if (!hs.empty()) loudest[{v, j}] = m;
            hear[{v, j}] = std::move(hs);
        }
    std::vector<std::pair<RoundRef, RoundRef>> out;
    for (const auto& [vj, hs] : hear) {
        const auto& vrec = trace.rounds.at(vj.agent)[vj.index];
        for (const auto& ui : hs) {
            if (!(vj < ui)) continue;  // unordered pairs once
            const auto& urec = trace.rounds.at(ui.agent)[ui.index];
            if (urec.state != vrec.state || urec.ell != vrec.ell) continue;
            const auto& back = hear.at(ui);
            if (std::find(back.begin(), back.end(), vj) == back.end()) continue;
            if (vrec.ell < loudest.at(vj) || urec.ell < loudest.at(ui)) continue;
            out.emplace_back(vj, ui);
        }
    }
    return out;
}

// Rounds ending In outside any collision; such an agent is In^~In for good.
inline std::set<RoundRef> stable_in_rounds(const AsyncTrace& trace) {
    auto collisions = detect_collisions(trace);
    std::set<RoundRef> colliding;
    for (const auto& [a, b] : collisions) {
        colliding.insert(a);
        colliding.insert(b);
    }
    std::set<RoundRef> out;
    for (const auto& [v, recs] : trace.rounds)
        for (int j = 0; j < static_cast<int>(recs.size()); ++j)
            if (recs[j].next == AgentState::In && !colliding.count({v, j})) out.insert({v, j});
    return out;
}

}  // namespace singmis
