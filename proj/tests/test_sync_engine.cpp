#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>

#include <singmis/analysis.hpp>
#include <singmis/csv.hpp>
#include <singmis/generators.hpp>
#include <singmis/sync_engine.hpp>

using namespace singmis;

namespace {

ForcedEll force_round1(std::map<AgentId, Ell> table) {
    return [table = std::move(table)](AgentId id, int round) -> std::optional<Ell> {
        if (round == 1 && table.count(id)) return table.at(id);
        return std::nullopt;
    };
}

ForcedEll force_all(std::map<AgentId, Ell> table) {
    return [table = std::move(table)](AgentId id, int) -> std::optional<Ell> {
        if (table.count(id)) return table.at(id);
        return std::nullopt;
    };
}

}  // namespace

TEST_CASE("single isolated Un agent joins the MIS in round 1") {
    Network net;
    net.add_agent(0);
    SyncConfig cfg;
    cfg.seed = 5;
    Trace t = run_sync(net, all_un(net), {}, cfg);
    REQUIRE(t.rounds.size() >= 1);
    CHECK(t.rounds[0].agents.at(0).next == AgentState::In);
    CHECK(t.final_states.at(0) == AgentState::In);
    CHECK(t.stop == StopReason::Converged);
    CHECK(t.rounds_run == 1);
}

TEST_CASE("triangle with forced ell (3,1,1) resolves in two rounds") {
    Network net = build_network({{0, 1}, {1, 2}, {0, 2}});
    SyncConfig cfg;
    cfg.seed = 1;
    cfg.max_rounds = 2;
    cfg.forced_ell = force_round1({{0, 3}, {1, 1}, {2, 1}});
    Trace t = run_sync(net, all_un(net), {}, cfg);
    REQUIRE(t.rounds.size() == 2);
    // round 1: agent 0 hears nothing above its ell, agents 1 and 2 hear each
    // other's note 1
    CHECK(t.rounds[0].agents.at(0).next == AgentState::In);
    CHECK(t.rounds[0].agents.at(1).next == AgentState::Un);
    CHECK(t.rounds[0].agents.at(2).next == AgentState::Un);
    // round 2: both Un agents hear note 0 from the In agent
    CHECK(t.rounds[1].agents.at(1).next == AgentState::Out);
    CHECK(t.rounds[1].agents.at(2).next == AgentState::Out);
    CHECK(t.final_states.at(0) == AgentState::In);
    CHECK(t.stop == StopReason::Converged);
}

TEST_CASE("equal forced ell on an edge stalls the singing protocol") {
    Network net = build_network({{0, 1}});
    SyncConfig cfg;
    cfg.seed = 9;
    cfg.max_rounds = 5;
    cfg.forced_ell = force_all({{0, 2}, {1, 2}});
    Trace t = run_sync(net, all_un(net), {}, cfg);
    CHECK(t.stop == StopReason::BudgetExhausted);
    for (const auto& rec : t.rounds) {
        CHECK(rec.agents.at(0).next == AgentState::Un);
        CHECK(rec.agents.at(1).next == AgentState::Un);
    }
}

TEST_CASE("self-jamming breaks an equal-ell tie via an In-In conflict") {
    Network net = build_network({{0, 1}});
    SyncConfig cfg;
    cfg.variant = Variant::SelfJamming;
    cfg.hearing = HearingMode::SelfJamming;
    cfg.seed = 9;
    cfg.max_rounds = 2;
    cfg.forced_ell = [](AgentId id, int round) -> std::optional<Ell> {
        if (round == 1) return 2;                 // tie: both transition to In
        return id == 0 ? Ell{2} : Ell{1};         // conflict round: 0 outsings 1
    };
    Trace t = run_sync(net, all_un(net), {}, cfg);
    REQUIRE(t.rounds.size() == 2);
    CHECK(t.rounds[0].agents.at(0).next == AgentState::In);
    CHECK(t.rounds[0].agents.at(1).next == AgentState::In);
    // agent 1 (ell=1) listens for 2*1=2 and hears it in agent 0's evens {0,2}
    CHECK(t.rounds[1].agents.at(1).next == AgentState::Un);
    CHECK(t.rounds[1].agents.at(0).next == AgentState::In);
}

TEST_CASE("is_converged spec examples") {
    Network path = gen_path(3);
    CHECK(is_converged(path, {{0, AgentState::In}, {1, AgentState::Out}, {2, AgentState::In}}));
    CHECK_FALSE(
        is_converged(path, {{0, AgentState::In}, {1, AgentState::Un}, {2, AgentState::In}}));
    Network tri = build_network({{0, 1}, {1, 2}, {0, 2}});
    CHECK_FALSE(
        is_converged(tri, {{0, AgentState::In}, {1, AgentState::In}, {2, AgentState::Out}}));
    // maximality: an Out agent with no In neighbor is not a valid MIS
    CHECK_FALSE(is_converged(path, {{0, AgentState::In}, {1, AgentState::Out},
                                    {2, AgentState::Out}}));
}

TEST_CASE("identical configuration yields a bit-identical trace") {
    Network net = gen_gnp(30, 0.15, 77);
    for (Variant v : {Variant::Singing, Variant::SelfJamming}) {
        SyncConfig cfg;
        cfg.variant = v;
        cfg.hearing = default_hearing(v);
        cfg.seed = 123;
        Trace a = run_sync(net, all_un(net), {}, cfg);
        Trace b = run_sync(net, all_un(net), {}, cfg);
        std::ostringstream ca, cb, sa, sb;
        write_trace_csv(ca, a);
        write_trace_csv(cb, b);
        write_summary_csv(sa, a);
        write_summary_csv(sb, b);
        CHECK(ca.str() == cb.str());
        CHECK(sa.str() == sb.str());
        CHECK(a.final_states == b.final_states);
        CHECK(a.rounds_run == b.rounds_run);
    }
}

TEST_CASE("branch seed only affects rounds after the branch point") {
    Network net = gen_gnp(24, 0.2, 3);
    SyncConfig cfg;
    cfg.seed = 55;
    cfg.max_rounds = 8;
    cfg.branch_after_round = 3;
    cfg.branch_seed = 1000;
    Trace a = run_sync(net, all_un(net), {}, cfg);
    cfg.branch_seed = 2000;
    Trace b = run_sync(net, all_un(net), {}, cfg);
    for (int r = 0; r < 3 && r < static_cast<int>(std::min(a.rounds.size(), b.rounds.size()));
         ++r) {
        const auto& ra = a.rounds[r].agents;
        const auto& rb = b.rounds[r].agents;
        REQUIRE(ra.size() == rb.size());
        for (const auto& [id, ar] : ra) {
            CHECK(ar.ell == rb.at(id).ell);
            CHECK(ar.next == rb.at(id).next);
        }
    }
}

TEST_CASE("static singing runs satisfy the paper's structural claims") {
    // Claim 4.1 (monotone exits from Un, never two adjacent In) and Claim 4.2
    // (active agents are Un with no In neighbor), plus absorbing eliminations.
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Network net = gen_gnp(40, 0.12, 400 + seed);
        SyncConfig cfg;
        cfg.seed = seed;
        Trace t = run_sync(net, all_un(net), {}, cfg);
        CHECK(t.stop == StopReason::Converged);
        CHECK(is_converged(t.final_net, t.final_states));
        CHECK(sync_in_in_violations(t) == 0);

        std::map<AgentId, AgentState> settled;
        Classification prev;
        for (std::size_t r = 0; r < t.rounds.size(); ++r) {
            const auto& rec = t.rounds[r];
            StateMap states = round_states(rec);
            for (const auto& [id, st] : states) {
                if (settled.count(id)) CHECK(st == settled.at(id));
                else if (st != AgentState::Un) settled[id] = st;
            }
            Classification c = classify(rec.net, states);
            for (const auto& [id, active] : c.agent_active)
                if (active) {
                    RefinedStatus rs = refined_status(rec.net, states, id);
                    CHECK(rs.base == AgentState::Un);
                    CHECK_FALSE(rs.has_in_neighbor);
                }
            if (r > 0)
                for (const auto& [id, active] : prev.agent_active)
                    if (!active) CHECK_FALSE(c.agent_active.at(id));
            prev = std::move(c);
        }
    }
}

TEST_CASE("both variants converge to a valid MIS on random graphs") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        for (Variant v : {Variant::Singing, Variant::SelfJamming}) {
            Network net = gen_gnp(48, 0.1, 900 + seed);
            SyncConfig cfg;
            cfg.variant = v;
            cfg.hearing = default_hearing(v);
            cfg.seed = seed;
            cfg.record_rounds = false;
            Trace t = run_sync(net, all_un(net), {}, cfg);
            CHECK(t.stop == StopReason::Converged);
            CHECK(is_converged(t.final_net, t.final_states));
        }
}

TEST_CASE("dynamic locality: unaffected eliminated edges stay eliminated") {
    for (Variant v : {Variant::Singing, Variant::SelfJamming}) {
        Network net = gen_gnp(36, 0.1, 31);
        ChangeScript script = make_churn_script(net, 25, 0.03, 77);
        SyncConfig cfg;
        cfg.variant = v;
        cfg.hearing = default_hearing(v);
        cfg.seed = 11;
        cfg.max_rounds = 30;
        Trace t = run_sync(net, all_un(net), script, cfg);
        for (std::size_t r = 0; r + 1 < t.rounds.size(); ++r) {
            const auto& cur = t.rounds[r];
            const auto& nxt = t.rounds[r + 1];
            Classification ci = classify(cur.net, round_states(cur));
            Classification cj = classify(nxt.net, round_states(nxt));
            for (const Edge& e : cur.net.edges()) {
                if (ci.edge_active.at(e)) continue;          // not eliminated
                if (!nxt.net.has_edge(e.a, e.b)) continue;   // edge went away
                if (nxt.affected.count(e)) continue;         // affected at i+1
                CHECK_FALSE(cj.edge_active.at(e));
            }
        }
    }
}

TEST_CASE("two-round settle-down on dynamic singing traces") {
    Network net = gen_gnp(36, 0.1, 53);
    ChangeScript script = make_churn_script(net, 25, 0.03, 54);
    SyncConfig cfg;
    cfg.seed = 21;
    cfg.max_rounds = 30;
    Trace t = run_sync(net, all_un(net), script, cfg);
    for (std::size_t r = 0; r + 2 < t.rounds.size(); ++r) {
        const auto& ri = t.rounds[r];
        const auto& r1 = t.rounds[r + 1];
        const auto& r2 = t.rounds[r + 2];
        Classification ci = classify(ri.net, round_states(ri));
        StateMap s2 = round_states(r2);
        Classification c2 = classify(r2.net, s2);
        for (AgentId v : r2.net.agents()) {
            // precondition: v keeps an edge that is unaffected at rounds i+1
            // and i+2 and present throughout
            bool shielded = false;
            if (ri.net.has_agent(v))
                for (AgentId w : r2.net.neighbors(v)) {
                    Edge e(v, w);
                    if (ri.net.has_edge(v, w) && r1.net.has_edge(v, w) &&
                        !r1.affected.count(e) && !r2.affected.count(e)) {
                        shielded = true;
                        break;
                    }
                }
            if (!shielded) continue;
            if (c2.agent_active.at(v)) {
                RefinedStatus rs = refined_status(r2.net, s2, v);
                CHECK(rs.base == AgentState::Un);
                CHECK_FALSE(rs.has_in_neighbor);
            }
            for (AgentId u : r2.net.neighbors(v))
                if (s2.at(u) == AgentState::Un && ri.net.has_agent(u))
                    CHECK(ci.agent_active.at(u));
        }
    }
}

TEST_CASE("a newly added agent runs the protocol in its arrival round") {
    Network net;
    net.add_agent(0);
    ChangeScript script;
    script.append(ChangeEvent::add_agent(1, 1, AgentState::Un, {0}));
    SyncConfig cfg;
    cfg.seed = 2;
    cfg.max_rounds = 3;
    Trace t = run_sync(net, {{0, AgentState::In}}, script, cfg);
    REQUIRE(!t.rounds.empty());
    REQUIRE(t.rounds[0].agents.count(1) == 1);
    // it hears note 0 from its In neighbor immediately
    CHECK(t.rounds[0].agents.at(1).next == AgentState::Out);
    CHECK(t.rounds[0].changed == std::set<AgentId>{0, 1});
}

TEST_CASE("configuration errors are rejected up front") {
    Network net = build_network({{0, 1}});
    SyncConfig cfg;
    cfg.variant = Variant::Singing;
    cfg.hearing = HearingMode::SelfJamming;
    CHECK_THROWS_AS(run_sync(net, all_un(net), {}, cfg), std::invalid_argument);
    cfg.allow_unsafe_pairing = true;
    cfg.max_rounds = 3;
    CHECK_NOTHROW(run_sync(net, all_un(net), {}, cfg));

    SyncConfig ok;
    CHECK_THROWS_WITH(run_sync(net, {{0, AgentState::Un}}, {}, ok),
                      Catch::Matchers::ContainsSubstring("missing"));
}

TEST_CASE("an inapplicable script event aborts the run with the event echoed") {
    Network net = build_network({{0, 1}});
    ChangeScript script;
    script.append(ChangeEvent::remove_edge(2, 0, 5));
    SyncConfig cfg;
    cfg.seed = 4;
    cfg.max_rounds = 10;
    cfg.forced_ell = force_all({{0, 2}, {1, 2}});  // stall so round 2 is reached
    CHECK_THROWS_WITH(run_sync(net, all_un(net), script, cfg),
                      Catch::Matchers::ContainsSubstring("-e 0 5"));
}

TEST_CASE("round budget default and exhaustion reporting") {
    CHECK(default_round_budget(0) == 64);
    CHECK(default_round_budget(1) == 128);
    CHECK(default_round_budget(4096) > 64 * 12);

    Network net = build_network({{0, 1}});
    SyncConfig cfg;
    cfg.max_rounds = 4;
    cfg.forced_ell = force_all({{0, 3}, {1, 3}});
    Trace t = run_sync(net, all_un(net), {}, cfg);
    CHECK(t.stop == StopReason::BudgetExhausted);
    CHECK(t.rounds_run == 4);
}

TEST_CASE("negative control: singing under self-jamming hearing deadlocks into conflict") {
    // On K2, an Un agent jams its own ell note, so mutual In is reachable and
    // sticky: both keep singing only note 0, which each jams for itself.
    Network net = build_network({{0, 1}});
    SyncConfig cfg;
    cfg.variant = Variant::Singing;
    cfg.hearing = HearingMode::SelfJamming;
    cfg.allow_unsafe_pairing = true;
    cfg.max_rounds = 50;
    int conflicts = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        cfg.seed = seed;
        Trace t = run_sync(net, all_un(net), {}, cfg);
        bool saw = false;
        for (const auto& rec : t.rounds)
            if (count_adjacent_in_in(rec.net, round_states(rec)) > 0) saw = true;
        if (count_adjacent_in_in(t.final_net, t.final_states) > 0) saw = true;
        if (saw) ++conflicts;
    }
    CHECK(conflicts == 50);
}
