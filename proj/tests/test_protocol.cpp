#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include <singmis/protocol.hpp>
#include <singmis/rng.hpp>

using namespace singmis;

TEST_CASE("sample_ell returns the index of the first 0 flip") {
    CounterRng rng{42, 7};
    for (int i = 0; i < 200; ++i) {
        CounterRng replay = rng;  // counter rngs copy by value
        Ell ell = sample_ell(rng, 0.5);
        Ell expect = 1;
        while (replay.bernoulli(0.5)) ++expect;
        CHECK(ell == expect);
        CHECK(ell >= 1);
    }
}

TEST_CASE("sample_ell rejects degenerate biases") {
    CounterRng rng{1};
    CHECK_THROWS_AS(sample_ell(rng, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sample_ell(rng, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(sample_ell(rng, -0.2), std::invalid_argument);
}

TEST_CASE("sample_ell matches the geometric law at p=1/2") {
    const int trials = 1'000'000;
    CounterRng rng{2024};
    std::map<Ell, int> hist;
    double sum = 0;
    int tail = 0;
    const double c = 6.0;
    for (int t = 0; t < trials; ++t) {
        Ell ell = sample_ell(rng, 0.5);
        ++hist[std::min<Ell>(ell, 12)];
        sum += double(ell);
        if (double(ell) > std::log2(64.0) + c) ++tail;
    }
    // chi-square against Pr[ell = k] = 2^-k, bins 1..11 plus a >=12 tail bin
    double chi2 = 0;
    for (Ell k = 1; k <= 12; ++k) {
        double p = (k < 12) ? std::pow(0.5, double(k)) : std::pow(0.5, 11.0);
        double expect = trials * p;
        double got = hist.count(k) ? hist[k] : 0;
        chi2 += (got - expect) * (got - expect) / expect;
    }
    CHECK(chi2 < 35.0);  // 11 dof, far beyond the 0.999 quantile
    CHECK_THAT(sum / trials, Catch::Matchers::WithinAbs(2.0, 0.01));
    // Pr[ell > log2(n) + c] <= 2^-c per draw; allow 3 sigma of slack
    double bound = trials * std::pow(0.5, c);
    CHECK(tail <= bound + 3.0 * std::sqrt(bound));
}

TEST_CASE("sing_notes spec examples") {
    CHECK(sing_notes(AgentState::Un, 3, Variant::Singing).materialize() ==
          std::vector<Note>{1, 2, 3});
    CHECK(sing_notes(AgentState::Out, 7, Variant::SelfJamming).materialize().empty());
    CHECK(sing_notes(AgentState::In, 3, Variant::SelfJamming).materialize() ==
          std::vector<Note>{0, 2, 4});
    CHECK(sing_notes(AgentState::In, 9, Variant::Singing).materialize() ==
          std::vector<Note>{0});

    // descriptor membership agrees with materialization
    for (Variant v : {Variant::Singing, Variant::SelfJamming})
        for (AgentState s : {AgentState::Out, AgentState::In, AgentState::Un})
            for (Ell ell = 1; ell <= 9; ++ell) {
                SungNotes d = sing_notes(s, ell, v);
                auto notes = d.materialize();
                for (Note n = -1; n <= 2 * ell + 2; ++n) {
                    bool in_vec =
                        std::find(notes.begin(), notes.end(), n) != notes.end();
                    CHECK(d.contains(n) == in_vec);
                }
            }
}

TEST_CASE("listen_set spec examples") {
    ListenSet a = listen_set(AgentState::Un, 4, Variant::Singing);
    CHECK(a.count == 2);
    CHECK(a.contains(0));
    CHECK(a.contains(4));
    ListenSet b = listen_set(AgentState::In, 3, Variant::SelfJamming);
    CHECK(b.count == 1);
    CHECK(b.contains(6));
    ListenSet c = listen_set(AgentState::Out, 9, Variant::Singing);
    CHECK(c.count == 1);
    CHECK(c.contains(0));
    ListenSet d = listen_set(AgentState::Un, 5, Variant::SelfJamming);
    CHECK(d.count == 2);
    CHECK(d.contains(0));
    CHECK(d.contains(11));
}

TEST_CASE("resolve_heard spec examples") {
    CHECK(resolve_heard({1, 2, 3}, {1, 2, 3, 4}, HearingMode::SelfJamming).notes ==
          std::vector<Note>{4});
    CHECK(resolve_heard({1}, {0, 1}, HearingMode::Plain).notes ==
          std::vector<Note>{0, 1});
    CHECK(resolve_heard({0, 2}, {0, 2}, HearingMode::SelfJamming).notes.empty());
}

TEST_CASE("transition spec examples") {
    auto heard = [](std::vector<Note> ns) { return HeardNotes{std::move(ns)}; };
    CHECK(transition(AgentState::Un, 2, heard({0}), Variant::Singing) == AgentState::Out);
    CHECK(transition(AgentState::Un, 2, heard({}), Variant::Singing) == AgentState::In);
    CHECK(transition(AgentState::In, 3, heard({0}), Variant::Singing) == AgentState::Un);
    CHECK(transition(AgentState::In, 3, heard({6}), Variant::SelfJamming) == AgentState::Un);
    CHECK(transition(AgentState::Un, 2, heard({2}), Variant::Singing) == AgentState::Un);
    CHECK(transition(AgentState::Out, 5, heard({}), Variant::Singing) == AgentState::Un);
    CHECK(transition(AgentState::Out, 5, heard({0}), Variant::SelfJamming) == AgentState::Out);
    CHECK(transition(AgentState::Un, 4, heard({9}), Variant::SelfJamming) == AgentState::Un);
    CHECK(transition(AgentState::Un, 4, heard({0, 9}), Variant::SelfJamming) == AgentState::Out);
}

TEST_CASE("transition rejects notes outside the listen set") {
    CHECK_THROWS_AS(transition(AgentState::In, 3, HeardNotes{{3}}, Variant::Singing),
                    std::logic_error);
    CHECK_THROWS_AS(transition(AgentState::Un, 3, HeardNotes{{2}}, Variant::Singing),
                    std::logic_error);
    CHECK_THROWS_AS(transition(AgentState::In, 3, HeardNotes{{5}}, Variant::SelfJamming),
                    std::logic_error);
}

TEST_CASE("parity separation: SJ listen sets never overlap own notes") {
    for (AgentState s : {AgentState::Out, AgentState::In, AgentState::Un})
        for (Ell ell = 1; ell <= 64; ++ell) {
            SungNotes own = sing_notes(s, ell, Variant::SelfJamming);
            ListenSet ls = listen_set(s, ell, Variant::SelfJamming);
            for (int i = 0; i < ls.count; ++i) CHECK_FALSE(own.contains(ls.notes[i]));
        }
}

TEST_CASE("domination semantics over note arithmetic") {
    for (Ell ell = 1; ell <= 64; ++ell)
        for (Ell lp = 1; lp <= 64; ++lp) {
            // Singing Un hears its own ell from a Un neighbor iff ell' >= ell
            CHECK(sing_notes(AgentState::Un, lp, Variant::Singing).contains(ell) ==
                  (lp >= ell));
            // SJ Un hears 2ell+1 from a Un neighbor iff ell' > ell
            CHECK(sing_notes(AgentState::Un, lp, Variant::SelfJamming).contains(2 * ell + 1) ==
                  (lp > ell));
            // SJ In hears 2ell from an In neighbor iff ell' > ell
            CHECK(sing_notes(AgentState::In, lp, Variant::SelfJamming).contains(2 * ell) ==
                  (lp > ell));
        }
}

namespace {

// Independent transcription of the Fig. 1 / Fig. 4 listings, written from the
// prose rather than via listen_set/HeardNotes.
std::optional<AgentState> oracle_transition(Variant v, AgentState s, Ell ell, bool heard0,
                                            bool heard_own) {
    if (v == Variant::Singing) {
        switch (s) {
            case AgentState::In:
                if (heard_own) return std::nullopt;  // In listens only for 0
                return heard0 ? AgentState::Un : AgentState::In;
            case AgentState::Un:
                if (heard0) return AgentState::Out;
                return heard_own ? AgentState::Un : AgentState::In;
            case AgentState::Out:
                if (heard_own) return std::nullopt;
                return heard0 ? AgentState::Out : AgentState::Un;
        }
    } else {
        switch (s) {
            case AgentState::In:  // listens only for 2ell
                if (heard0) return std::nullopt;
                return heard_own ? AgentState::Un : AgentState::In;
            case AgentState::Un:
                if (heard0) return AgentState::Out;
                return heard_own ? AgentState::Un : AgentState::In;
            case AgentState::Out:
                if (heard_own) return std::nullopt;
                return heard0 ? AgentState::Out : AgentState::Un;
        }
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("exhaustive transition table matches the hand-coded oracle") {
    for (Variant v : {Variant::Singing, Variant::SelfJamming})
        for (AgentState s : {AgentState::Out, AgentState::In, AgentState::Un})
            for (Ell ell = 1; ell <= 8; ++ell)
                for (int mask = 0; mask < 4; ++mask) {
                    const bool heard0 = mask & 1;
                    const bool heard_own = mask & 2;
                    ListenSet ls = listen_set(s, ell, v);
                    // "own" = the state-specific non-zero note, when one exists
                    std::optional<Note> own;
                    for (int i = 0; i < ls.count; ++i)
                        if (ls.notes[i] != 0) own = ls.notes[i];
                    if (heard_own && !own) continue;  // no second note to hear
                    HeardNotes heard;
                    if (heard0) heard.add(0);
                    if (heard_own) heard.add(*own);
                    auto expect = oracle_transition(v, s, ell, heard0, heard_own);
                    if (!expect) continue;  // combination outside the listen set
                    CHECK(transition(s, ell, heard, v) == *expect);
                }
}

TEST_CASE("pairing safety and defaults") {
    CHECK(pairing_is_safe(Variant::Singing, HearingMode::Plain));
    CHECK(pairing_is_safe(Variant::SelfJamming, HearingMode::SelfJamming));
    CHECK_FALSE(pairing_is_safe(Variant::Singing, HearingMode::SelfJamming));
    CHECK_FALSE(pairing_is_safe(Variant::SelfJamming, HearingMode::Plain));
    CHECK(default_hearing(Variant::Singing) == HearingMode::Plain);
    CHECK(default_hearing(Variant::SelfJamming) == HearingMode::SelfJamming);
}

TEST_CASE("state names round trip") {
    for (AgentState s : {AgentState::Out, AgentState::In, AgentState::Un})
        CHECK(agent_state_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(agent_state_from_string("BOTH"), std::runtime_error);
}
