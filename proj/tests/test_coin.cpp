#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <singmis/analysis.hpp>
#include <singmis/coin.hpp>
#include <singmis/rng.hpp>

using namespace singmis;

TEST_CASE("decide_winner spec examples") {
    auto a = decide_winner({5, 2, 2});
    REQUIRE(a.winner.has_value());
    CHECK(*a.winner == 0);
    CHECK_FALSE(a.tie);

    auto b = decide_winner({3, 3, 1});
    CHECK_FALSE(b.winner.has_value());
    CHECK(b.tie);

    auto c = decide_winner({4});
    CHECK(*c.winner == 0);

    CHECK_THROWS_AS(decide_winner({}), std::invalid_argument);
}

TEST_CASE("run_competition basics") {
    CounterRng rng{14};
    for (int t = 0; t < 100; ++t) {
        auto out = run_competition(1, 0.5, rng);
        REQUIRE(out.winner.has_value());
        CHECK(*out.winner == 0);
        CHECK(out.steps.size() == 1);
    }
    for (int t = 0; t < 200; ++t) {
        auto out = run_competition(5, 0.5, rng);
        CHECK(out.steps.size() == 5);
        CHECK(out.winner.has_value() != out.tie);
        if (out.winner) {
            for (int i = 0; i < 5; ++i)
                if (i != *out.winner) CHECK(out.steps[i] < out.steps[*out.winner]);
        }
    }
    CHECK_THROWS_AS(run_competition(0, 0.5, rng), std::invalid_argument);
}

TEST_CASE("y_lower_bound spec examples") {
    CHECK_THAT(y_lower_bound(3, 0.5), Catch::Matchers::WithinAbs(2.0 / 9.0, 1e-12));
    CHECK_THAT(y_lower_bound(1, 0.5), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THAT(y_lower_bound(6, 0.5), Catch::Matchers::WithinAbs(1.0 / 9.0, 1e-12));
    CHECK_THROWS_AS(y_lower_bound(0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(y_lower_bound(2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(y_lower_bound(2, 1.0), std::invalid_argument);
}

namespace {

// Exact y_d for d <= 3 via enumeration with ell capped at 6.  The cap is made
// lossless by memorylessness: conditioned on a set T of agents all exceeding
// the cap, their excesses are again i.i.d. geometric, so the strict-max
// probability within T is the same Y(|T|) — a small linear fixpoint instead of
// an infinite sum.
double exact_y(int d, double p) {
    std::vector<double> y(d + 1, 0.0);
    y[1] = 1.0;
    const double top = std::pow(p, 6.0);  // Pr[ell > 6]
    for (int m = 2; m <= d; ++m) {
        // finite part: agent 0 draws k in 2..6, the other m-1 draw less
        double a = 0.0;
        for (int k = 2; k <= 6; ++k)
            a += std::pow(p, k - 1.0) * (1.0 - p) * std::pow(1.0 - std::pow(p, k - 1.0), m - 1.0);
        // capped part: agent 0 in the top set T, the rest below the cap
        double b = 0.0;
        for (int extra = 0; extra < m - 1; ++extra) {
            // T = {0} plus `extra` of the other m-1 agents
            double ways = 1.0;
            for (int i = 0; i < extra; ++i) ways = ways * (m - 1 - i) / (i + 1);
            b += ways * std::pow(top, extra + 1.0) * std::pow(1.0 - top, m - 1.0 - extra) *
                 y[extra + 1];
        }
        // T = all m agents recurses onto y[m] itself
        y[m] = (a + b) / (1.0 - std::pow(top, static_cast<double>(m)));
    }
    return y[d];
}

}  // namespace

TEST_CASE("capped-enumeration oracle confirms the win bound exactly") {
    for (double p : {0.25, 0.5, 0.75})
        for (int d = 1; d <= 3; ++d) {
            const double y = exact_y(d, p);
            CHECK(y >= y_lower_bound(d, p) - 1e-12);
        }
    // closed forms: y_2 = p/(1+p); y_3 = 1 - 2/(1+p) + 1/(1+p+p^2)
    for (double p : {0.25, 0.5, 0.75}) {
        CHECK_THAT(exact_y(2, p), Catch::Matchers::WithinAbs(p / (1.0 + p), 1e-12));
        CHECK_THAT(exact_y(3, p),
                   Catch::Matchers::WithinAbs(1.0 - 2.0 / (1.0 + p) + 1.0 / (1.0 + p + p * p),
                                              1e-12));
    }
    // the paper's tightest tested point: p=3/4, d=3 clears 2/7 by under 0.004
    CHECK(exact_y(3, 0.75) >= 2.0 / 7.0);
    CHECK(exact_y(3, 0.75) <= 2.0 / 7.0 + 0.005);
}

TEST_CASE("oracle agrees with Monte Carlo estimates") {
    for (double p : {0.25, 0.75})
        for (int d = 2; d <= 3; ++d) {
            CoinEstimate e = estimate_coin_bounds(d, p, 200000, 71);
            CHECK_THAT(exact_y(d, p),
                       Catch::Matchers::WithinAbs(e.y_hat, 3.0 * e.y_sigma + 1e-9));
        }
}

TEST_CASE("all agents win equally often") {
    const int d = 4, trials = 200000;
    std::vector<long long> wins(d, 0);
    long long decided = 0;
    for (int t = 0; t < trials; ++t) {
        CounterRng rng{55, static_cast<std::uint64_t>(t)};
        auto out = run_competition(d, 0.5, rng);
        if (out.winner) {
            ++wins[*out.winner];
            ++decided;
        }
    }
    const double expect = static_cast<double>(decided) / d;
    double chi2 = 0.0;
    for (int i = 0; i < d; ++i) chi2 += (wins[i] - expect) * (wins[i] - expect) / expect;
    CHECK(chi2 < 16.3);  // 3 dof, 0.999 quantile
}

TEST_CASE("x_trial is a fair lexicographic race") {
    const int trials = 200000;
    int wins = 0;
    for (int t = 0; t < trials; ++t) {
        CounterRng rng{91, static_cast<std::uint64_t>(t)};
        if (x_trial(3, 0.5, rng)) ++wins;
    }
    double hat = static_cast<double>(wins) / trials;
    double sigma = std::sqrt(hat * (1.0 - hat) / trials);
    CHECK_THAT(hat, Catch::Matchers::WithinAbs(1.0 / 3.0, 3.0 * sigma + 1e-9));

    CounterRng rng{1};
    CHECK(x_trial(1, 0.5, rng));
    CHECK_THROWS_AS(x_trial(0, 0.5, rng), std::invalid_argument);
}
