#pragma once

#include <ostream>

#include "async_engine.hpp"
#include "protocol.hpp"
#include "sync_engine.hpp"

namespace singmis {

// One row per agent-round.  heard0 / heard_own are the two possible listen
// slots: note 0 and the state-dependent second note (ell, 2ell or 2ell+1).
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
    os << "round,agent,state,ell,heard0,heard_own,next_state\n";
    for (const auto& rec : trace.rounds)
        for (const auto& [id, ar] : rec.agents) {
            const ListenSet ls = listen_set(ar.state, ar.ell, trace.variant);
            bool heard0 = ls.contains(0) && ar.heard.has(0);
            bool heard_own = false;
            for (int k = 0; k < ls.count; ++k)
                if (ls.notes[k] != 0 && ar.heard.has(ls.notes[k])) heard_own = true;
            os << rec.round << ',' << id << ',' << to_string(ar.state) << ',' << ar.ell << ','
               << (heard0 ? 1 : 0) << ',' << (heard_own ? 1 : 0) << ',' << to_string(ar.next)
               << '\n';
        }
}

inline void write_summary_csv(std::ostream& os, const Trace& trace) {
    os << "round,e,affected,num_un,num_in,num_out\n";
    for (const auto& s : trace.summary)
        os << s.round << ',' << s.active_edges << ',' << s.affected << ',' << s.num_un << ','
           << s.num_in << ',' << s.num_out << '\n';
}

inline void write_async_trace_csv(std::ostream& os, const AsyncTrace& trace) {
    os << "agent,round_index,start_tick,end_tick,state,ell,next_state\n";
    for (const auto& [id, recs] : trace.rounds)
        for (const auto& r : recs)
            os << id << ',' << r.index << ',' << r.start << ',' << r.end << ','
               << to_string(r.state) << ',' << r.ell << ',' << to_string(r.next) << '\n';
}

inline void write_transmissions_csv(std::ostream& os, const AsyncTrace& trace) {
    os << "singer,round_index,listener,delay,audible_from,audible_to\n";
    for (const auto& [id, recs] : trace.rounds)
        for (const auto& r : recs)
            for (AgentId v : trace.net.neighbors(id)) {
                const Tick d = transmission_delay(trace, id, v, r.index);
                os << id << ',' << r.index << ',' << v << ',' << d << ',' << r.start + d << ','
                   << r.end + d << '\n';
            }
}

}  // namespace singmis
