#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "network.hpp"
#include "rng.hpp"

namespace singmis {

inline Network gen_path(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("path: n >= 1");
    Network net;
    for (AgentId i = 0; i < n; ++i) net.add_agent(i);
    for (AgentId i = 0; i + 1 < n; ++i) net.add_edge(i, i + 1);
    return net;
}

inline Network gen_ring(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("ring: n >= 1");
    Network net = gen_path(n);
    if (n >= 3) net.add_edge(n - 1, 0);
    return net;
}

inline Network gen_complete(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("complete: n >= 1");
    Network net;
    for (AgentId i = 0; i < n; ++i) net.add_agent(i);
    for (AgentId i = 0; i < n; ++i)
        for (AgentId j = i + 1; j < n; ++j) net.add_edge(i, j);
    return net;
}

// Star with center 0 and n-1 leaves.
inline Network gen_star(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("star: n >= 1");
    Network net;
    for (AgentId i = 0; i < n; ++i) net.add_agent(i);
    for (AgentId i = 1; i < n; ++i) net.add_edge(0, i);
    return net;
}

inline Network gen_grid(std::int64_t rows, std::int64_t cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("grid: rows, cols >= 1");
    Network net;
    auto id = [cols](std::int64_t r, std::int64_t c) { return r * cols + c; };
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) net.add_agent(id(r, c));
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) {
            if (c + 1 < cols) net.add_edge(id(r, c), id(r, c + 1));
            if (r + 1 < rows) net.add_edge(id(r, c), id(r + 1, c));
        }
    return net;
}

inline Network gen_gnp(std::int64_t n, double p_edge, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gnp: n >= 1");
    if (p_edge < 0.0 || p_edge > 1.0) throw std::invalid_argument("gnp: p in [0,1]");
    Network net;
    for (AgentId i = 0; i < n; ++i) net.add_agent(i);
    CounterRng rng{seed, 0x676e70ull};
    for (AgentId i = 0; i < n; ++i)
        for (AgentId j = i + 1; j < n; ++j)
            if (rng.bernoulli(p_edge)) net.add_edge(i, j);
    return net;
}

// Replayable random churn: each round, every existing edge is deleted with
// probability q and each of `pool` sampled absent pairs is inserted with
// probability q.  The script is generated against a private copy of the
// network, so the events are applicable by construction.
inline ChangeScript make_churn_script(const Network& start, int rounds, double q,
                                      std::uint64_t seed, int pool = -1) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("churn: q in [0,1]");
    Network net = start;
    const std::vector<AgentId> ids = net.agents();
    if (pool < 0) pool = static_cast<int>(ids.size());
    ChangeScript script;
    for (int r = 1; r <= rounds; ++r) {
        CounterRng rng{seed, 0x6368ull, static_cast<std::uint64_t>(r)};
        std::vector<ChangeEvent> evs;
        for (const Edge& e : net.edges())
            if (rng.bernoulli(q)) evs.push_back(ChangeEvent::remove_edge(r, e.a, e.b));
        for (const ChangeEvent& ev : evs) net.remove_edge(ev.u, ev.v);
        if (ids.size() >= 2)
            for (int k = 0; k < pool; ++k) {
                AgentId u = ids[rng.below(ids.size())];
                AgentId v = ids[rng.below(ids.size())];
                if (u == v || net.has_edge(u, v)) continue;
                if (rng.bernoulli(q)) {
                    evs.push_back(ChangeEvent::add_edge(r, u, v));
                    net.add_edge(u, v);
                }
            }
        for (const ChangeEvent& ev : evs) script.append(ev);
    }
    return script;
}

// Parses "gnp:256,0.05", "ring:100", "grid:16,16", "complete:64", "star:8",
// "path:3".
inline Network generate(const std::string& spec, std::uint64_t seed) {
    auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("generator spec needs a ':' — e.g. gnp:256,0.05");
    std::string family = spec.substr(0, colon);
    std::string args = spec.substr(colon + 1);
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : args) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    try {
        if (family == "gnp") {
            if (parts.size() != 2) throw std::invalid_argument("gnp:n,p");
            return gen_gnp(std::stoll(parts[0]), std::stod(parts[1]), seed);
        }
        if (family == "ring") return gen_ring(std::stoll(parts.at(0)));
        if (family == "grid") {
            if (parts.size() != 2) throw std::invalid_argument("grid:rows,cols");
            return gen_grid(std::stoll(parts[0]), std::stoll(parts[1]));
        }
        if (family == "complete") return gen_complete(std::stoll(parts.at(0)));
        if (family == "star") return gen_star(std::stoll(parts.at(0)));
        if (family == "path") return gen_path(std::stoll(parts.at(0)));
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& ex) {
        throw std::invalid_argument("bad generator arguments in \"" + spec + "\": " + ex.what());
    }
    throw std::invalid_argument("unknown generator family \"" + family + "\"");
}

}  // namespace singmis
