#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "protocol.hpp"
#include "rng.hpp"

namespace singmis {

/* The standalone coin-flipping competition: d agents each draw a geometric
 * step count (flip a p-biased coin until the first 0); the winner, if any, is
 * the unique strict maximum. */

struct CompetitionOutcome {
    std::vector<Ell> steps;
    std::optional<int> winner;  // index of the unique strict maximum
    bool tie = false;
};

inline CompetitionOutcome decide_winner(std::vector<Ell> steps) {
    if (steps.empty()) throw std::invalid_argument("decide_winner: d >= 1");
    CompetitionOutcome out;
    out.steps = std::move(steps);
    int best = 0;
    bool unique = true;
    for (int i = 1; i < static_cast<int>(out.steps.size()); ++i) {
        if (out.steps[i] > out.steps[best]) {
            best = i;
            unique = true;
        } else if (out.steps[i] == out.steps[best]) {
            unique = false;
        }
    }
    if (unique) out.winner = best;
    out.tie = !unique;
    return out;
}

inline CompetitionOutcome run_competition(int d, double p, CounterRng& rng) {
    if (d < 1) throw std::invalid_argument("run_competition: d >= 1");
    std::vector<Ell> steps;
    steps.reserve(d);
    for (int i = 0; i < d; ++i) steps.push_back(sample_ell(rng, p));
    return decide_winner(std::move(steps));
}

// Lemma bound: y_d >= 2p / ((1+p) d).
inline double y_lower_bound(int d, double p) {
    if (d < 1) throw std::invalid_argument("y_lower_bound: d >= 1");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("y_lower_bound: p in (0,1)");
    return 2.0 * p / ((1.0 + p) * d);
}

// One trial of the infinite-binary-string comparison: does agent 0 hold the
// lexicographically largest of d i.i.d. p-biased strings?  Flips are drawn
// lazily; a surviving tie after flip_cap flips is scored as a loss for agent
// 0, which biases against the x_d = 1/d hypothesis rather than for it.
inline bool x_trial(int d, double p, CounterRng& rng, int flip_cap = 10000) {
    if (d < 1) throw std::invalid_argument("x_trial: d >= 1");
    std::vector<int> alive(d);
    for (int i = 0; i < d; ++i) alive[i] = i;
    for (int flip = 0; flip < flip_cap && alive.size() > 1; ++flip) {
        std::vector<char> bit(alive.size());
        bool any1 = false, any0 = false;
        for (std::size_t k = 0; k < alive.size(); ++k) {
            bit[k] = rng.bernoulli(p);
            (bit[k] ? any1 : any0) = true;
        }
        if (!(any1 && any0)) continue;
        std::vector<int> next;
        for (std::size_t k = 0; k < alive.size(); ++k)
            if (bit[k]) next.push_back(alive[k]);
        alive = std::move(next);
    }
    return alive.size() == 1 && alive[0] == 0;
}

}  // namespace singmis
