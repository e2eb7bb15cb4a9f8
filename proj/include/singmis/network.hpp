#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "protocol.hpp"

namespace singmis {

using AgentId = std::int64_t;

// Unordered pair stored smaller id first.
struct Edge {
    AgentId a = 0;
    AgentId b = 0;

    Edge() = default;
    Edge(AgentId u, AgentId v) {
        if (u == v) throw std::invalid_argument("self-loop edge " + std::to_string(u));
        a = std::min(u, v);
        b = std::max(u, v);
    }
    auto operator<=>(const Edge&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Edge& e) {
    return os << "{" << e.a << "," << e.b << "}";
}

class Network {
public:
    void add_agent(AgentId id) {
        if (id < 0) throw std::invalid_argument("negative agent id " + std::to_string(id));
        adj_.emplace(id, std::set<AgentId>{});
    }

    void remove_agent(AgentId id) {
        auto it = adj_.find(id);
        if (it == adj_.end())
            throw std::runtime_error("remove_agent: no such agent " + std::to_string(id));
        for (AgentId nbr : it->second) adj_.at(nbr).erase(id);
        edge_count_ -= static_cast<long long>(it->second.size());
        adj_.erase(it);
    }

    void add_edge(AgentId u, AgentId v) {
        Edge e(u, v);
        if (!has_agent(u) || !has_agent(v))
            throw std::runtime_error("add_edge: missing endpoint for edge " + std::to_string(u) +
                                     " " + std::to_string(v));
        if (has_edge(u, v)) throw std::runtime_error("add_edge: duplicate edge " + std::to_string(e.a) + " " + std::to_string(e.b));
        adj_.at(u).insert(v);
        adj_.at(v).insert(u);
        ++edge_count_;
    }

    void remove_edge(AgentId u, AgentId v) {
        if (!has_edge(u, v))
            throw std::runtime_error("remove_edge: no such edge " + std::to_string(u) + " " +
                                     std::to_string(v));
        adj_.at(u).erase(v);
        adj_.at(v).erase(u);
        --edge_count_;
    }

    bool has_agent(AgentId id) const { return adj_.count(id) != 0; }

    bool has_edge(AgentId u, AgentId v) const {
        auto it = adj_.find(u);
        return it != adj_.end() && it->second.count(v) != 0;
    }

    const std::set<AgentId>& neighbors(AgentId id) const {
        auto it = adj_.find(id);
        if (it == adj_.end())
            throw std::runtime_error("neighbors: no such agent " + std::to_string(id));
        return it->second;
    }

    std::size_t agent_count() const { return adj_.size(); }
    long long edge_count() const { return edge_count_; }

    std::vector<AgentId> agents() const {
        std::vector<AgentId> out;
        out.reserve(adj_.size());
        for (const auto& [id, _] : adj_) out.push_back(id);
        return out;
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(static_cast<std::size_t>(edge_count_));
        for (const auto& [id, nbrs] : adj_)
            for (AgentId v : nbrs)
                if (id < v) out.emplace_back(id, v);
        return out;
    }

    bool operator==(const Network&) const = default;

private:
    std::map<AgentId, std::set<AgentId>> adj_;
    long long edge_count_ = 0;
};

inline Network build_network(const std::vector<std::pair<AgentId, AgentId>>& edge_list) {
    Network net;
    std::size_t line = 0;
    for (const auto& [u, v] : edge_list) {
        ++line;
        if (u < 0 || v < 0)
            throw std::runtime_error("edge " + std::to_string(line) + ": negative agent id");
        if (u == v)
            throw std::runtime_error("edge " + std::to_string(line) + ": self-loop at agent " +
                                     std::to_string(u));
        if (!net.has_agent(u)) net.add_agent(u);
        if (!net.has_agent(v)) net.add_agent(v);
        if (net.has_edge(u, v))
            throw std::runtime_error("edge " + std::to_string(line) + ": duplicate edge " +
                                     std::to_string(u) + " " + std::to_string(v));
        net.add_edge(u, v);
    }
    return net;
}

// Adjacency of both operands; used to anchor affected-edge distances across a
// round boundary where edges were both removed and inserted.
inline Network graph_union(const Network& a, const Network& b) {
    Network out = a;
    for (AgentId id : b.agents())
        if (!out.has_agent(id)) out.add_agent(id);
    for (const Edge& e : b.edges())
        if (!out.has_edge(e.a, e.b)) out.add_edge(e.a, e.b);
    return out;
}

/* -------------------------------------------------------------------------- */

struct ChangeEvent {
    enum class Kind { AddEdge, RemoveEdge, AddAgent, RemoveAgent };

    int round = 1;
    Kind kind = Kind::AddEdge;
    AgentId u = 0;
    AgentId v = 0;                          // AddEdge/RemoveEdge only
    AgentState initial_state = AgentState::Un;  // AddAgent only
    std::vector<AgentId> attach;            // AddAgent only

    static ChangeEvent add_edge(int round, AgentId u, AgentId v) {
        return {round, Kind::AddEdge, u, v};
    }
    static ChangeEvent remove_edge(int round, AgentId u, AgentId v) {
        return {round, Kind::RemoveEdge, u, v};
    }
    static ChangeEvent add_agent(int round, AgentId u, AgentState s, std::vector<AgentId> attach) {
        ChangeEvent ev{round, Kind::AddAgent, u};
        ev.initial_state = s;
        ev.attach = std::move(attach);
        return ev;
    }
    static ChangeEvent remove_agent(int round, AgentId u) {
        return {round, Kind::RemoveAgent, u};
    }

    std::string describe() const {
        std::ostringstream os;
        os << "round " << round << ": ";
        switch (kind) {
            case Kind::AddEdge: os << "+e " << u << " " << v; break;
            case Kind::RemoveEdge: os << "-e " << u << " " << v; break;
            case Kind::AddAgent:
                os << "+a " << u << " " << to_string(initial_state);
                for (AgentId w : attach) os << " " << w;
                break;
            case Kind::RemoveAgent: os << "-a " << u; break;
        }
        return os.str();
    }
};

struct ChangeScript {
    std::vector<ChangeEvent> events;  // sorted by round

    bool empty() const { return events.empty(); }

    void append(ChangeEvent ev) {
        if (!events.empty() && ev.round < events.back().round)
            throw std::runtime_error("change script not sorted at " + ev.describe());
        events.push_back(std::move(ev));
    }

    std::vector<ChangeEvent> events_for(int round) const {
        std::vector<ChangeEvent> out;
        for (const auto& ev : events)
            if (ev.round == round) out.push_back(ev);
        return out;
    }

    int last_round() const { return events.empty() ? 0 : events.back().round; }
};

struct ChangeResult {
    std::set<AgentId> changed;                  // agents incident to an added/deleted edge
    std::map<AgentId, AgentState> added_states; // adversarial initial states of new agents
    std::set<AgentId> removed_agents;
};

// Applies one round's worth of events in order.  Ids of agents removed in an
// earlier round may not be reused; removal + re-insertion within the same
// round is the faulty-agent idiom and is allowed.
inline ChangeResult apply_changes(Network& net, const std::vector<ChangeEvent>& events,
                                  const std::set<AgentId>* retired_ids = nullptr) {
    ChangeResult res;
    for (const auto& ev : events) {
        try {
            switch (ev.kind) {
                case ChangeEvent::Kind::AddEdge:
                    net.add_edge(ev.u, ev.v);
                    res.changed.insert(ev.u);
                    res.changed.insert(ev.v);
                    break;
                case ChangeEvent::Kind::RemoveEdge:
                    net.remove_edge(ev.u, ev.v);
                    res.changed.insert(ev.u);
                    res.changed.insert(ev.v);
                    break;
                case ChangeEvent::Kind::AddAgent: {
                    if (net.has_agent(ev.u))
                        throw std::runtime_error("agent already present");
                    if (retired_ids && retired_ids->count(ev.u) && !res.removed_agents.count(ev.u))
                        throw std::runtime_error("agent id was retired in an earlier round");
                    net.add_agent(ev.u);
                    for (AgentId w : ev.attach) {
                        net.add_edge(ev.u, w);
                        res.changed.insert(w);
                    }
                    res.changed.insert(ev.u);
                    res.added_states[ev.u] = ev.initial_state;
                    break;
                }
                case ChangeEvent::Kind::RemoveAgent: {
                    res.changed.insert(ev.u);
                    for (AgentId nbr : net.neighbors(ev.u)) res.changed.insert(nbr);
                    net.remove_agent(ev.u);
                    res.removed_agents.insert(ev.u);
                    res.added_states.erase(ev.u);
                    break;
                }
            }
        } catch (const std::exception& ex) {
            throw std::runtime_error("inapplicable change event [" + ev.describe() +
                                     "]: " + ex.what());
        }
    }
    return res;
}

// All edges of `g` with an endpoint within graph distance 2 of a changed
// agent.  Callers pass the union of the adjacency before and after the
// round's events so that distances survive deletions.
inline std::set<Edge> affected_edges(const Network& g, const std::set<AgentId>& changed) {
    std::map<AgentId, int> dist;
    std::queue<AgentId> frontier;
    for (AgentId c : changed) {
        if (!g.has_agent(c)) continue;
        dist[c] = 0;
        frontier.push(c);
    }
    while (!frontier.empty()) {
        AgentId u = frontier.front();
        frontier.pop();
        int d = dist[u];
        if (d == 2) continue;
        for (AgentId v : g.neighbors(u)) {
            if (dist.count(v)) continue;
            dist[v] = d + 1;
            frontier.push(v);
        }
    }
    std::set<Edge> out;
    for (const auto& [id, d] : dist)
        for (AgentId v : g.neighbors(id)) out.insert(Edge(id, v));
    return out;
}

/* ------------------------------- file formats ----------------------------- */

// One edge per line: "u v".  '#' starts a comment; blank lines are skipped.
inline Network parse_edge_list(std::istream& in, const std::string& name = "<edge list>") {
    Network net;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        AgentId u, v;
        if (!(ls >> u)) continue;  // blank
        if (!(ls >> v))
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": expected \"u v\"");
        try {
            if (u < 0 || v < 0) throw std::runtime_error("negative agent id");
            if (!net.has_agent(u)) net.add_agent(u);
            if (!net.has_agent(v)) net.add_agent(v);
            net.add_edge(u, v);
        } catch (const std::exception& ex) {
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return net;
}

inline Network load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge list " + path);
    return parse_edge_list(in, path);
}

inline void write_edge_list(std::ostream& out, const Network& net) {
    for (AgentId id : net.agents())
        if (net.neighbors(id).empty()) out << "# isolated agent " << id << "\n";
    for (const Edge& e : net.edges()) out << e.a << " " << e.b << "\n";
}

// One event per line:
//   ROUND +e u v | ROUND -e u v | ROUND +a u STATE v1 v2 ... | ROUND -a u
inline ChangeScript parse_change_script(std::istream& in,
                                        const std::string& name = "<change script>") {
    ChangeScript script;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int round;
        std::string op;
        if (!(ls >> round)) continue;
        auto fail = [&](const std::string& why) -> std::runtime_error {
            return std::runtime_error(name + ":" + std::to_string(lineno) + ": " + why);
        };
        if (!(ls >> op)) throw fail("missing event kind");
        if (round < 1) throw fail("round index must be >= 1");
        ChangeEvent ev;
        ev.round = round;
        if (op == "+e" || op == "-e") {
            ev.kind = op == "+e" ? ChangeEvent::Kind::AddEdge : ChangeEvent::Kind::RemoveEdge;
            if (!(ls >> ev.u >> ev.v)) throw fail("expected two agent ids");
        } else if (op == "+a") {
            ev.kind = ChangeEvent::Kind::AddAgent;
            std::string state;
            if (!(ls >> ev.u >> state)) throw fail("expected agent id and state");
            ev.initial_state = agent_state_from_string(state);
            AgentId w;
            while (ls >> w) ev.attach.push_back(w);
        } else if (op == "-a") {
            ev.kind = ChangeEvent::Kind::RemoveAgent;
            if (!(ls >> ev.u)) throw fail("expected agent id");
        } else {
            throw fail("unknown event kind \"" + op + "\"");
        }
        try {
            script.append(ev);
        } catch (const std::exception& ex) {
            throw fail(ex.what());
        }
    }
    return script;
}

inline ChangeScript load_change_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open change script " + path);
    return parse_change_script(in, path);
}

inline void write_change_script(std::ostream& out, const ChangeScript& script) {
    for (const auto& ev : script.events) {
        out << ev.round << " ";
        switch (ev.kind) {
            case ChangeEvent::Kind::AddEdge: out << "+e " << ev.u << " " << ev.v; break;
            case ChangeEvent::Kind::RemoveEdge: out << "-e " << ev.u << " " << ev.v; break;
            case ChangeEvent::Kind::AddAgent:
                out << "+a " << ev.u << " " << to_string(ev.initial_state);
                for (AgentId w : ev.attach) out << " " << w;
                break;
            case ChangeEvent::Kind::RemoveAgent: out << "-a " << ev.u; break;
        }
        out << "\n";
    }
}

}  // namespace singmis
