#include <gtest/gtest.h>

#include "fertgrid/reconcile.hpp"

using namespace fertgrid;

TEST(NetBudget, SharesAndBounds) {
    EXPECT_DOUBLE_EQ(net_budget(1000.0, 0.0), 1000.0);
    EXPECT_DOUBLE_EQ(net_budget(1000.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(net_budget(1000.0, 0.25), 750.0);
    EXPECT_THROW(net_budget(1000.0, -0.1), std::invalid_argument);
    EXPECT_THROW(net_budget(1000.0, 1.1), std::invalid_argument);
}

TEST(Adjust, HandTracedScaling) {
    // two crops (rate 10, area 100; rate 20, area 100), budget 6 t:
    // implied 3000 kg, target 6000 kg -> s = 2
    auto b = make_budget("X", "N", 2000, 6.0, 0.0);
    auto adj = adjust_predictions({10.0, 20.0}, {100.0, 100.0}, b);
    EXPECT_DOUBLE_EQ(adj.scale, 2.0);
    EXPECT_DOUBLE_EQ(adj.rates[0], 20.0);
    EXPECT_DOUBLE_EQ(adj.rates[1], 40.0);
}

TEST(Adjust, IdentityWhenAlreadyBalanced) {
    auto b = make_budget("X", "N", 2000, 3.0, 0.0); // 3000 kg
    auto adj = adjust_predictions({10.0, 20.0}, {100.0, 100.0}, b);
    EXPECT_DOUBLE_EQ(adj.scale, 1.0);
    EXPECT_DOUBLE_EQ(adj.rates[0], 10.0);
}

TEST(Adjust, ZeroBudgetZeroesRates) {
    auto b = make_budget("X", "N", 2000, 0.0, 0.0);
    auto adj = adjust_predictions({10.0, 20.0}, {100.0, 100.0}, b);
    EXPECT_DOUBLE_EQ(adj.scale, 0.0);
    for (double r : adj.rates) EXPECT_DOUBLE_EQ(r, 0.0);
}

TEST(Adjust, NothingToScaleIsError) {
    auto b = make_budget("X", "N", 2000, 5.0, 0.0);
    EXPECT_THROW(adjust_predictions({0.0, 0.0}, {100.0, 100.0}, b), std::runtime_error);
}

TEST(Adjust, ConservationOrderAndIdempotenceFuzz) {
    Rng rng(77);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 1 + rng.uniform(12);
        std::vector<double> rates(n), areas(n);
        for (std::size_t i = 0; i < n; ++i) {
            rates[i] = rng.uniform_real(0.0, 250.0);
            areas[i] = rng.uniform_real(0.0, 1e6);
        }
        double implied = 0.0;
        for (std::size_t i = 0; i < n; ++i) implied += rates[i] * areas[i];
        if (!(implied > 0.0)) continue;
        const double total_t = rng.uniform_real(0.1, 5000.0);
        const double share = rng.uniform_real(0.0, 0.9);
        auto b = make_budget("X", "N", 2000, total_t, share);

        auto adj = adjust_predictions(rates, areas, b);
        double got = 0.0;
        for (std::size_t i = 0; i < n; ++i) got += adj.rates[i] * areas[i];
        const double want = b.net_budget_t * 1000.0;
        EXPECT_NEAR(got, want, 1e-9 * want);

        // ranking preserved under a single positive scalar
        for (std::size_t i = 1; i < n; ++i)
            EXPECT_EQ(rates[i - 1] < rates[i], adj.rates[i - 1] < adj.rates[i]);

        // adjusting the adjusted rates is the identity
        auto again = adjust_predictions(adj.rates, areas, b);
        EXPECT_NEAR(again.scale, 1.0, 1e-12);
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_NEAR(again.rates[i], adj.rates[i], 1e-12 * std::max(1.0, adj.rates[i]));
    }
}
