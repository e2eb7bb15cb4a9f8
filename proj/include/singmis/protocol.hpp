#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace singmis {

/* Per-agent protocol logic.  Everything here is a pure function of
 * (state, ell, variant); the engines own all mutable simulation state. */

enum class AgentState : std::uint8_t { Out, In, Un };
enum class Variant : std::uint8_t { Singing, SelfJamming };
enum class HearingMode : std::uint8_t { Plain, SelfJamming };

using Note = std::int64_t;
using Ell = std::int64_t;

inline const char* to_string(AgentState s) {
    switch (s) {
        case AgentState::Out: return "OUT";
        case AgentState::In: return "IN";
        case AgentState::Un: return "UN";
    }
    return "?";
}

inline AgentState agent_state_from_string(const std::string& s) {
    if (s == "OUT" || s == "Out" || s == "out") return AgentState::Out;
    if (s == "IN" || s == "In" || s == "in") return AgentState::In;
    if (s == "UN" || s == "Un" || s == "un") return AgentState::Un;
    throw std::runtime_error("unknown agent state: " + s);
}

// Number of coin flips up to and including the first 0, where each flip is 1
// with probability p.  Pr[ell = k] = p^(k-1) * (1-p).
inline Ell sample_ell(CounterRng& rng, double p = 0.5) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("sample_ell: p must lie in (0,1)");
    Ell k = 1;
    while (rng.bernoulli(p)) ++k;
    return k;
}

// The notes an agent sings in a round, stored as a descriptor.  All protocol
// note sets are arithmetic progressions, so there is no reason to materialize
// them per round.
//   Singing:     Out -> {},  In -> {0},            Un -> {1..ell}
//   SelfJamming: Out -> {},  In -> {0,2,..,2ell-2}, Un -> {1,3,..,2ell-1}
struct SungNotes {
    Variant variant = Variant::Singing;
    AgentState state = AgentState::Out;
    Ell ell = 1;

    bool empty() const { return state == AgentState::Out; }

    bool contains(Note n) const {
        if (state == AgentState::Out || n < 0) return false;
        if (variant == Variant::Singing) {
            if (state == AgentState::In) return n == 0;
            return n >= 1 && n <= ell;
        }
        if (state == AgentState::In) return n % 2 == 0 && n <= 2 * ell - 2;
        return n % 2 == 1 && n <= 2 * ell - 1;
    }

    std::vector<Note> materialize() const {
        std::vector<Note> out;
        if (state == AgentState::Out) return out;
        if (variant == Variant::Singing) {
            if (state == AgentState::In) return {0};
            for (Note n = 1; n <= ell; ++n) out.push_back(n);
            return out;
        }
        if (state == AgentState::In)
            for (Note n = 0; n <= 2 * ell - 2; n += 2) out.push_back(n);
        else
            for (Note n = 1; n <= 2 * ell - 1; n += 2) out.push_back(n);
        return out;
    }
};

inline SungNotes sing_notes(AgentState s, Ell ell, Variant v) { return SungNotes{v, s, ell}; }

// The notes an agent listens for; never more than two.
struct ListenSet {
    std::array<Note, 2> notes{0, 0};
    int count = 0;

    bool contains(Note n) const {
        for (int i = 0; i < count; ++i)
            if (notes[i] == n) return true;
        return false;
    }
};

inline ListenSet listen_set(AgentState s, Ell ell, Variant v) {
    if (v == Variant::Singing) {
        if (s == AgentState::Un) return {{0, ell}, 2};
        return {{0, 0}, 1};
    }
    switch (s) {
        case AgentState::Out: return {{0, 0}, 1};
        case AgentState::In: return {{2 * ell, 0}, 1};
        case AgentState::Un: return {{0, 2 * ell + 1}, 2};
    }
    return {};
}

// Heard notes restricted to the listen set.
struct HeardNotes {
    std::vector<Note> notes;

    bool has(Note n) const { return std::find(notes.begin(), notes.end(), n) != notes.end(); }
    void add(Note n) {
        if (!has(n)) notes.push_back(n);
    }
};

inline HeardNotes resolve_heard(const std::vector<Note>& own, const std::vector<Note>& neighbor_union,
                                HearingMode mode) {
    HeardNotes out;
    for (Note n : neighbor_union) {
        if (mode == HearingMode::SelfJamming &&
            std::find(own.begin(), own.end(), n) != own.end())
            continue;
        out.add(n);
    }
    return out;
}

// End-of-round state update.  `heard` must be a subset of the agent's listen
// set; anything else is an engine bug, not a protocol outcome.
inline AgentState transition(AgentState s, Ell ell, const HeardNotes& heard, Variant v) {
    const ListenSet ls = listen_set(s, ell, v);
    for (Note n : heard.notes)
        if (!ls.contains(n))
            throw std::logic_error("transition: heard note " + std::to_string(n) +
                                   " outside the listen set");

    if (v == Variant::Singing) {
        switch (s) {
            case AgentState::In:
                return heard.has(0) ? AgentState::Un : AgentState::In;
            case AgentState::Un:
                if (heard.has(0)) return AgentState::Out;
                return heard.has(ell) ? AgentState::Un : AgentState::In;
            case AgentState::Out:
                return heard.has(0) ? AgentState::Out : AgentState::Un;
        }
    } else {
        switch (s) {
            case AgentState::In:
                return heard.has(2 * ell) ? AgentState::Un : AgentState::In;
            case AgentState::Un:
                if (heard.has(0)) return AgentState::Out;
                return heard.has(2 * ell + 1) ? AgentState::Un : AgentState::In;
            case AgentState::Out:
                return heard.has(0) ? AgentState::Out : AgentState::Un;
        }
    }
    throw std::logic_error("transition: unreachable");
}

// Default variant/hearing pairing.  Running the plain singing protocol under
// self-jamming hearing is broken on purpose (an Un agent jams its own ell
// note); it is kept reachable only behind an explicit flag as a negative
// control.
inline bool pairing_is_safe(Variant v, HearingMode m) {
    return (v == Variant::Singing && m == HearingMode::Plain) ||
           (v == Variant::SelfJamming && m == HearingMode::SelfJamming);
}

inline HearingMode default_hearing(Variant v) {
    return v == Variant::Singing ? HearingMode::Plain : HearingMode::SelfJamming;
}

}  // namespace singmis
