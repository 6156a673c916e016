#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

#include "feel/quality.hpp"
#include "feel/rng.hpp"

using namespace feel;

TEST_CASE("gini-simpson closed-form values") {
    REQUIRE(gini_simpson(std::vector<std::size_t>(10, 7)) == Catch::Approx(0.9).margin(1e-15));
    REQUIRE(gini_simpson({42}) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(gini_simpson({30, 20}) == Catch::Approx(0.48).margin(1e-15));
    REQUIRE_THROWS_AS(gini_simpson({0, 0, 0}), std::invalid_argument);
}

TEST_CASE("diversity index composes the three normalized metrics") {
    const std::array<double, 3> thirds{1.0 / 3, 1.0 / 3, 1.0 / 3};
    PopulationStats stats{100, 0};

    // uniform labels, half the max size, never selected: I = (1 + 0.5 + 1)/3
    const auto m = diversity_metrics(std::vector<std::size_t>(10, 5), 50, 0, stats, 10);
    REQUIRE(m[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(m[1] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(m[2] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(diversity_index(m, thirds) == Catch::Approx(0.8333333333333333).margin(1e-12));

    // all metrics at their maximum
    const auto top = diversity_metrics(std::vector<std::size_t>(10, 10), 100, 0, stats, 10);
    REQUIRE(diversity_index(top, thirds) == Catch::Approx(1.0).margin(1e-12));

    // weight selection reduces I to the normalized Gini-Simpson alone
    const auto skew = diversity_metrics({30, 20}, 50, 3, stats, 2);
    REQUIRE(diversity_index(skew, {1.0, 0.0, 0.0}) ==
            Catch::Approx(0.48 / 0.5).margin(1e-12));
}

TEST_CASE("age metric rewards unseen datasets") {
    PopulationStats stats{10, 5};
    const auto fresh = diversity_metrics({5, 5}, 10, 0, stats, 2);
    const auto stale = diversity_metrics({5, 5}, 10, 4, stats, 2);
    REQUIRE(fresh[2] == 1.0);
    REQUIRE(stale[2] == Catch::Approx(0.2));
    REQUIRE(fresh[2] > stale[2]);
}

TEST_CASE("reputation update follows the correction rule") {
    // no deviation, no change
    REQUIRE(update_reputation(0.8, 0.7, 0.7, 0.7, 1.0, 0.5, 0.5) == Catch::Approx(0.8));
    // frozen example: 1 - (0.5*0.2 + 0.5*0.4) = 0.7
    REQUIRE(update_reputation(1.0, 0.9, 0.7, 0.5, 1.0, 0.5, 0.5) ==
            Catch::Approx(0.7).margin(1e-15));
    // reporting under both baselines raises R, clamped at 1
    REQUIRE(update_reputation(1.0, 0.2, 0.6, 0.7, 1.0, 0.5, 0.5) == 1.0);
    REQUIRE(update_reputation(0.95, 0.2, 0.6, 0.7, 1.0, 0.5, 0.5) == 1.0);
    // and the floor clamp
    REQUIRE(update_reputation(0.1, 1.0, 0.2, 0.1, 1.0, 1.0, 1.0) == 0.0);
    // eta = 0 freezes reputation
    REQUIRE(update_reputation(0.4, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0) == 0.4);
}

TEST_CASE("persistently inflated reports drive R to the floor") {
    double r = 1.0;
    double prev = r;
    int hits_zero = -1;
    for (int t = 0; t < 20; ++t) {
        r = update_reputation(r, 0.9, 0.8, 0.6, 1.0, 0.5, 0.5);
        if (r > 0.0) REQUIRE(r < prev); // strictly decreasing until clamped
        if (r == 0.0 && hits_zero < 0) hits_zero = t;
        prev = r;
    }
    REQUIRE(hits_zero >= 0);
    REQUIRE(r == 0.0);
}

TEST_CASE("a 0.3 local/test gap at beta2=0.5 costs 0.6 reputation in 4 rounds") {
    double r = 1.0;
    for (int t = 0; t < 4; ++t) {
        const double acc_test = 0.5;
        const double acc_local = acc_test + 0.3;
        r = update_reputation(r, acc_local, acc_local, acc_test, 1.0, 0.5, 0.5);
    }
    REQUIRE(r <= 0.4);
    REQUIRE(r == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("value combines reputation and diversity linearly") {
    REQUIRE(quality_value(0.8, 0.6, 1.0, 0.0) == 0.8);
    REQUIRE(quality_value(0.8, 0.6, 0.0, 1.0) == 0.6);
    REQUIRE(quality_value(0.8, 0.6, 0.5, 0.5) == Catch::Approx(0.7).margin(1e-15));
}

TEST_CASE("ranking by V is invariant under common positive scaling") {
    auto rng = derive_stream(31, "quality_fuzz");
    for (int trial = 0; trial < 20; ++trial) {
        const double w1 = rng.uniform();
        const double w2 = 1.0 - w1;
        std::vector<double> r(12), i(12);
        for (std::size_t k = 0; k < 12; ++k) {
            r[k] = rng.uniform();
            i[k] = rng.uniform();
        }
        const double scale = rng.uniform(0.1, 9.0);
        std::vector<std::size_t> order1(12), order2(12);
        std::iota(order1.begin(), order1.end(), std::size_t{0});
        order2 = order1;
        auto by_value = [&](double s) {
            return [&, s](std::size_t a, std::size_t b) {
                return quality_value(s * r[a], s * i[a], w1, w2) >
                       quality_value(s * r[b], s * i[b], w1, w2);
            };
        };
        std::stable_sort(order1.begin(), order1.end(), by_value(1.0));
        std::stable_sort(order2.begin(), order2.end(), by_value(scale));
        REQUIRE(order1 == order2);
    }
}

TEST_CASE("bounds: I and V stay inside [0,1] for normalized inputs") {
    auto rng = derive_stream(37, "quality_bounds");
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, 3> gamma{rng.uniform(), rng.uniform(), rng.uniform()};
        const double gsum = gamma[0] + gamma[1] + gamma[2];
        for (auto& g : gamma) g /= gsum;
        const std::array<double, 3> v{rng.uniform(), rng.uniform(), rng.uniform()};
        const double i = diversity_index(v, gamma);
        REQUIRE(i >= 0.0);
        REQUIRE(i <= 1.0);
        const double w1 = rng.uniform();
        const double val = quality_value(rng.uniform(), i, w1, 1.0 - w1);
        REQUIRE(val >= 0.0);
        REQUIRE(val <= 1.0);
    }
}

TEST_CASE("reputation holds at the ceiling when reports sit at or below both baselines") {
    // scripted all-honest round: every UE reports acc_local <= min(avg, acc_test)
    std::vector<double> rep(5, 1.0);
    for (int round = 0; round < 3; ++round) {
        const double acc_local = 0.6;
        const double avg = 0.6;       // everyone reports the same value
        const double acc_test = 0.7;  // server-side test confirms at least as much
        for (auto& r : rep) r = update_reputation(r, acc_local, avg, acc_test, 1.0, 0.5, 0.5);
    }
    for (double r : rep) REQUIRE(r == 1.0);
}
