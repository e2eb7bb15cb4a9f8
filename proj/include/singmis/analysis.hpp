#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "async_engine.hpp"
#include "coin.hpp"
#include "network.hpp"
#include "protocol.hpp"
#include "rng.hpp"
#include "sync_engine.hpp"

namespace singmis {

struct RefinedStatus {
    AgentState base = AgentState::Un;
    bool has_in_neighbor = false;  // the In / ~In superscript
};

inline RefinedStatus refined_status(const Network& net, const StateMap& states, AgentId v) {
    RefinedStatus r;
    r.base = states.at(v);
    for (AgentId u : net.neighbors(v))
        if (states.at(u) == AgentState::In) {
            r.has_in_neighbor = true;
            break;
        }
    return r;
}

// Def. 1: an agent is eliminated iff it is In^~In or adjacent to an In^~In
// agent; an edge is eliminated iff an endpoint is.
struct Classification {
    std::map<AgentId, bool> agent_active;
    std::map<Edge, bool> edge_active;
    long long active_edges = 0;
};

inline Classification classify(const Network& net, const StateMap& states) {
    for (AgentId id : net.agents())
        if (!states.count(id))
            throw std::invalid_argument("classify: state missing for agent " + std::to_string(id));
    std::set<AgentId> lonely_in;
    for (AgentId v : net.agents()) {
        RefinedStatus r = refined_status(net, states, v);
        if (r.base == AgentState::In && !r.has_in_neighbor) lonely_in.insert(v);
    }
    Classification c;
    for (AgentId v : net.agents()) {
        bool elim = lonely_in.count(v) > 0;
        if (!elim)
            for (AgentId u : net.neighbors(v))
                if (lonely_in.count(u)) {
                    elim = true;
                    break;
                }
        c.agent_active[v] = !elim;
    }
    for (const Edge& e : net.edges()) {
        bool active = c.agent_active.at(e.a) && c.agent_active.at(e.b);
        c.edge_active[e] = active;
        if (active) ++c.active_edges;
    }
    return c;
}

inline bool is_mis(const Network& net, const StateMap& states) { return is_converged(net, states); }

struct ContractionReport {
    std::size_t samples = 0;
    double mean = 0.0;    // of the measured quantity
    double stderr_ = 0.0;
    double bound = 0.0;   // value the mean is compared against
    bool one_sided_ge = false;  // true: pass iff mean >= bound - 3 sigma
    bool pass = false;
    std::string detail;
};

inline void finish_report(ContractionReport& r, const std::vector<double>& xs) {
    r.samples = xs.size();
    if (xs.empty()) return;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stderr_ = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1) / xs.size()) : 0.0;
    r.pass = r.one_sided_ge ? r.mean >= r.bound - 3.0 * r.stderr_
                            : r.mean <= r.bound + 3.0 * r.stderr_;
}

// E[e_{i+2}] <= (3/4) e_i, checked by restart sampling: the base seed fixes
// the configuration after round i, each branch seed drives two more rounds.
inline ContractionReport check_static_contraction(const Network& net, std::uint64_t base_seed,
                                                  int round_i, int branches,
                                                  double bound = 0.75) {
    SyncConfig base;
    base.seed = base_seed;
    base.record_rounds = false;
    base.max_rounds = round_i > 0 ? round_i : 1;
    ContractionReport rep;
    rep.bound = bound;
    long long e_i = 0;
    if (round_i == 0) {
        e_i = classify(net, all_un(net)).active_edges;
    } else {
        Trace t = run_sync(net, all_un(net), {}, base);
        if (t.rounds_run < round_i) {
            rep.detail = "converged before round " + std::to_string(round_i);
            return rep;
        }
        e_i = classify(t.final_net, t.final_states).active_edges;
    }
    if (e_i == 0) {
        rep.detail = "e_i = 0, no window to sample";
        return rep;
    }
    std::vector<double> ratios;
    ratios.reserve(branches);
    for (int b = 0; b < branches; ++b) {
        SyncConfig cfg = base;
        cfg.max_rounds = round_i + 2;
        cfg.branch_after_round = round_i;
        cfg.branch_seed = mix64(base_seed ^ mix64(0xb2a7c500ull + b));
        Trace t = run_sync(net, all_un(net), {}, cfg);
        long long e2 = classify(t.final_net, t.final_states).active_edges;
        ratios.push_back(static_cast<double>(e2) / static_cast<double>(e_i));
    }
    finish_report(rep, ratios);
    rep.detail = "mean e_{i+2}/e_i over " + std::to_string(branches) + " branches, e_i = " +
                 std::to_string(e_i);
    return rep;
}

// Dynamic bound: E[|E_{i+3}|] <= c_e |E_i| + c_a |A_{i+1} u A_{i+2} u A_{i+3}|
// with (c_e, c_a) = (3/4, 1) for Singing and (6/7, 8/7) for self-jamming.
inline ContractionReport check_dynamic_contraction(const Network& net, const ChangeScript& script,
                                                   Variant variant, std::uint64_t base_seed,
                                                   int round_i, int branches) {
    const double c_e = variant == Variant::Singing ? 0.75 : 6.0 / 7.0;
    const double c_a = variant == Variant::Singing ? 1.0 : 8.0 / 7.0;
    SyncConfig base;
    base.variant = variant;
    base.hearing = default_hearing(variant);
    base.seed = base_seed;
    base.record_rounds = false;

    ContractionReport rep;
    long long e_i = 0;
    if (round_i == 0) {
        e_i = classify(net, all_un(net)).active_edges;
    } else {
        SyncConfig cfg = base;
        cfg.max_rounds = round_i;
        Trace t = run_sync(net, all_un(net), script, cfg);
        e_i = classify(t.final_net, t.final_states).active_edges;
    }

    // The affected sets depend only on the script, not on the coin flips, so
    // one recorded branch yields the union for every branch.
    std::set<Edge> a_union;
    {
        SyncConfig cfg = base;
        cfg.max_rounds = round_i + 3;
        cfg.record_rounds = true;
        cfg.branch_after_round = round_i;
        cfg.branch_seed = mix64(base_seed ^ 0xa0u);
        Trace t = run_sync(net, all_un(net), script, cfg);
        for (const auto& rec : t.rounds)
            if (rec.round > round_i)
                a_union.insert(rec.affected.begin(), rec.affected.end());
    }
    rep.bound = c_e * static_cast<double>(e_i) + c_a * static_cast<double>(a_union.size());

    std::vector<double> sizes;
    sizes.reserve(branches);
    for (int b = 0; b < branches; ++b) {
        SyncConfig cfg = base;
        cfg.max_rounds = round_i + 3;
        cfg.branch_after_round = round_i;
        cfg.branch_seed = mix64(base_seed ^ mix64(0xd7bc0900ull + b));
        Trace t = run_sync(net, all_un(net), script, cfg);
        sizes.push_back(
            static_cast<double>(classify(t.final_net, t.final_states).active_edges));
    }
    finish_report(rep, sizes);
    rep.detail = "mean |E_{i+3}| vs " + std::to_string(c_e) + "*|E_i| + " + std::to_string(c_a) +
                 "*|A|, |E_i| = " + std::to_string(e_i) +
                 ", |A| = " + std::to_string(a_union.size());
    return rep;
}

// Async window decrease: |E_t| - E[|E_{t+T_diff}|] >= |E_t|/divisor *
// T_min/T_diff, with (divisor, T_diff) = (28, 2 delta_max + 3 t_max) for
// Singing and (98, 2 delta_max + 6 t_max) for self-jamming.
inline ContractionReport check_async_contraction(const Network& net, const TimingParams& params,
                                                 Variant variant, std::uint64_t base_seed,
                                                 Tick t, int branches) {
    const double divisor = variant == Variant::Singing ? 28.0 : 98.0;
    const Tick t_diff = 2 * params.delta_max +
                        (variant == Variant::Singing ? 3 : 6) * params.t_max;
    AsyncConfig base;
    base.variant = variant;
    base.hearing = default_hearing(variant);
    base.seed = base_seed;
    base.horizon = t + t_diff + params.t_max;

    ContractionReport rep;
    rep.one_sided_ge = true;

    long long e_t = -1;
    std::vector<double> decreases;
    decreases.reserve(branches);
    for (int b = 0; b < branches; ++b) {
        AsyncConfig cfg = base;
        cfg.branch_after_tick = t;
        cfg.branch_seed = mix64(base_seed ^ mix64(0xa51c0000ull + b));
        AsyncTrace tr = run_async(net, all_un(net), params, SchedulePolicy{}, cfg);
        if (e_t < 0) {
            e_t = classify(net, states_at(tr, t)).active_edges;
            if (e_t == 0) {
                rep.detail = "|E_t| = 0, window vacuous";
                return rep;
            }
            rep.bound = static_cast<double>(e_t) / divisor * static_cast<double>(params.t_min) /
                        static_cast<double>(t_diff);
        }
        long long e_end = classify(net, states_at(tr, t + t_diff)).active_edges;
        decreases.push_back(static_cast<double>(e_t - e_end));
    }
    finish_report(rep, decreases);
    rep.detail = "mean decrease over T_diff = " + std::to_string(t_diff) +
                 " ticks, |E_t| = " + std::to_string(e_t);
    return rep;
}

inline long long count_adjacent_in_in(const Network& net, const StateMap& states) {
    long long n = 0;
    for (const Edge& e : net.edges())
        if (states.at(e.a) == AgentState::In && states.at(e.b) == AgentState::In) ++n;
    return n;
}

inline StateMap round_states(const RoundRecord& rec) {
    StateMap m;
    for (const auto& [id, ar] : rec.agents) m[id] = ar.state;
    return m;
}

// Adjacent In-In pairs anywhere in a sync trace (rounds plus final states).
inline long long sync_in_in_violations(const Trace& trace) {
    long long n = 0;
    for (const auto& rec : trace.rounds) n += count_adjacent_in_in(rec.net, round_states(rec));
    n += count_adjacent_in_in(trace.final_net, trace.final_states);
    return n;
}

// Adjacent In-In pairs at any round boundary of an async trace.  States only
// change at boundaries, so sweeping those ticks covers all ticks.
inline long long async_in_in_violations(const AsyncTrace& trace) {
    std::set<Tick> ticks{0};
    for (const auto& [id, recs] : trace.rounds)
        for (const auto& r : recs) ticks.insert(r.end);
    long long n = 0;
    for (Tick t : ticks) n += count_adjacent_in_in(trace.net, states_at(trace, t));
    return n;
}

// Same check in O(boundaries * degree): replay the commits in tick order and
// look at the neighborhood of every agent whose state just changed.
inline long long async_in_in_commit_violations(const AsyncTrace& trace) {
    struct Ev {
        Tick tick;
        AgentId agent;
        AgentState next;
    };
    std::vector<Ev> events;
    for (const auto& [id, recs] : trace.rounds)
        for (const auto& r : recs) events.push_back({r.end, id, r.next});
    std::sort(events.begin(), events.end(),
              [](const Ev& a, const Ev& b) { return a.tick < b.tick; });
    StateMap st = trace.initial_states;
    long long bad = count_adjacent_in_in(trace.net, st);
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        for (; j < events.size() && events[j].tick == events[i].tick; ++j)
            st[events[j].agent] = events[j].next;
        for (std::size_t k = i; k < j; ++k) {
            if (st.at(events[k].agent) != AgentState::In) continue;
            for (AgentId u : trace.net.neighbors(events[k].agent))
                if (st.at(u) == AgentState::In) ++bad;
        }
        i = j;
    }
    return bad;
}

// Lemma lem:time: for adjacent u,v and rounds (u,i), (v,j) with (u,i) ending
// no later, either the two rounds hear each other or (v,j) hears a later
// round of u.  Pairs whose promised later round lies beyond the recorded
// horizon are skipped — the trace cannot witness either side of the
// disjunction for them.  Quadratic per edge; meant for small traces.
inline long long lem_time_violations(const AsyncTrace& trace) {
    long long bad = 0;
    for (const Edge& e : trace.net.edges())
        for (auto [u, v] : {std::pair{e.a, e.b}, std::pair{e.b, e.a}}) {
            const auto& ur = trace.rounds.at(u);
            const auto& vr = trace.rounds.at(v);
            if (ur.empty() || vr.empty()) continue;
            for (int i = 0; i < static_cast<int>(ur.size()); ++i)
                for (int j = 0; j < static_cast<int>(vr.size()); ++j) {
                    if (ur[i].end > vr[j].end) continue;
                    if (ur.back().end < vr[j].end) continue;  // u's trace truncated
                    bool ok = hears_from(trace, u, i, v, j) && hears_from(trace, v, j, u, i);
                    for (int k = i + 1; !ok && k < static_cast<int>(ur.size()); ++k)
                        ok = hears_from(trace, u, k, v, j);
                    if (!ok) ++bad;
                }
        }
    return bad;
}

// SJ async: a stable-In boundary pins the agent to In forever, and none of
// its neighbors ever reaches a stable-In boundary.
inline long long stable_in_violations(const AsyncTrace& trace) {
    const auto stable = stable_in_rounds(trace);
    std::map<AgentId, int> first_stable;  // earliest stable round index
    for (const auto& r : stable)
        if (!first_stable.count(r.agent) || r.index < first_stable[r.agent])
            first_stable[r.agent] = r.index;
    long long bad = 0;
    for (const auto& [v, j0] : first_stable) {
        const auto& recs = trace.rounds.at(v);
        for (int j = j0; j < static_cast<int>(recs.size()); ++j)
            if (recs[j].next != AgentState::In) ++bad;
        for (AgentId u : trace.net.neighbors(v))
            if (first_stable.count(u)) ++bad;
    }
    return bad;
}

struct CoinEstimate {
    double y_hat = 0.0;  // Pr[agent 0 draws a strict maximum]
    double x_hat = 0.0;  // Pr[agent 0 holds the largest infinite string]
    double bound = 0.0;  // 2p/((1+p)d)
    double y_sigma = 0.0, x_sigma = 0.0;
};

inline CoinEstimate estimate_coin_bounds(int d, double p, int trials, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("estimate_coin_bounds: d >= 1");
    if (trials < 1) throw std::invalid_argument("estimate_coin_bounds: trials >= 1");
    long long y_wins = 0, x_wins = 0;
    for (int t = 0; t < trials; ++t) {
        CounterRng rng{seed, 0x79ull, static_cast<std::uint64_t>(t)};
        auto out = run_competition(d, p, rng);
        if (out.winner && *out.winner == 0) ++y_wins;
        CounterRng rng2{seed, 0x78ull, static_cast<std::uint64_t>(t)};
        if (x_trial(d, p, rng2)) ++x_wins;
    }
    CoinEstimate e;
    e.y_hat = static_cast<double>(y_wins) / trials;
    e.x_hat = static_cast<double>(x_wins) / trials;
    e.bound = y_lower_bound(d, p);
    e.y_sigma = std::sqrt(e.y_hat * (1.0 - e.y_hat) / trials);
    e.x_sigma = std::sqrt(e.x_hat * (1.0 - e.x_hat) / trials);
    return e;
}

// Heterogeneous competition: alpha_j = p_j / (xbar2_j + p_j (1 - xbar2_j))
// with xbar2_j the worst-case two-party win probability against any other
// bias.  Homogeneous input collapses to 2p/(1+p).
inline std::vector<double> alpha_bounds(const std::vector<double>& p_values) {
    for (double p : p_values)
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("alpha_bounds: p in (0,1)");
    std::vector<double> out;
    out.reserve(p_values.size());
    for (std::size_t j = 0; j < p_values.size(); ++j) {
        const double pj = p_values[j];
        double xbar2 = 1.0;
        for (std::size_t k = 0; k < p_values.size(); ++k) {
            if (k == j) continue;
            const double pk = p_values[k];
            xbar2 = std::min(xbar2, pj * (1.0 - pk) / (pj * (1.0 - pk) + pk * (1.0 - pj)));
        }
        if (p_values.size() == 1) xbar2 = 0.5;  // no rival; keep the homogeneous reduction
        out.push_back(pj / (xbar2 + pj * (1.0 - xbar2)));
    }
    return out;
}

struct EligibilityReport {
    std::size_t agents_checked = 0;
    std::size_t violations = 0;
    double worst_margin = 1.0;  // min over agents of elim_rate - ((1-p_v)/2 - 3 sigma)
    bool pass = false;
};

// Lemma lem:elig (self-jamming, synchronous): from any configuration, each
// active agent is eliminated within two rounds with probability at least
// (1 - p_v)/2, where p_v is the probability it is still Un with no In
// neighbor two rounds later.
inline EligibilityReport check_eligibility(const Network& net, std::uint64_t base_seed,
                                           int round_i, int branches) {
    SyncConfig base;
    base.variant = Variant::SelfJamming;
    base.hearing = HearingMode::SelfJamming;
    base.seed = base_seed;
    base.record_rounds = false;

    std::vector<AgentId> tracked;
    {
        StateMap states;
        Network net_i = net;
        if (round_i == 0) {
            states = all_un(net);
        } else {
            SyncConfig cfg = base;
            cfg.max_rounds = round_i;
            Trace t = run_sync(net, all_un(net), {}, cfg);
            states = t.final_states;
            net_i = t.final_net;
        }
        Classification c = classify(net_i, states);
        for (const auto& [id, active] : c.agent_active)
            if (active) tracked.push_back(id);
    }

    std::map<AgentId, long long> elim_count, pv_count;
    for (int b = 0; b < branches; ++b) {
        SyncConfig cfg = base;
        cfg.max_rounds = round_i + 2;
        cfg.branch_after_round = round_i;
        cfg.branch_seed = mix64(base_seed ^ mix64(0xe1160000ull + b));
        Trace t = run_sync(net, all_un(net), {}, cfg);
        Classification c = classify(t.final_net, t.final_states);
        for (AgentId v : tracked) {
            if (!c.agent_active.at(v)) ++elim_count[v];
            RefinedStatus r = refined_status(t.final_net, t.final_states, v);
            if (r.base == AgentState::Un && !r.has_in_neighbor) ++pv_count[v];
        }
    }

    EligibilityReport rep;
    rep.agents_checked = tracked.size();
    for (AgentId v : tracked) {
        const double elim = static_cast<double>(elim_count[v]) / branches;
        const double pv = static_cast<double>(pv_count[v]) / branches;
        const double sigma = std::sqrt(std::max(elim * (1.0 - elim), pv * (1.0 - pv) / 4.0) /
                                       branches);
        const double margin = elim - ((1.0 - pv) / 2.0 - 3.0 * sigma);
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin < 0.0) ++rep.violations;
    }
    rep.pass = rep.violations == 0;
    return rep;
}

}  // namespace singmis
