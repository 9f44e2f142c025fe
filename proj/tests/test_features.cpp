#include <gtest/gtest.h>

#include "fertgrid/features.hpp"

using namespace fertgrid;

TEST(Harmonize, RateOverTotalArea) {
    EXPECT_DOUBLE_EQ(harmonize_rate(1.0, 80.0), 80.0);
    EXPECT_DOUBLE_EQ(harmonize_rate(0.0, 500.0), 0.0);
    EXPECT_DOUBLE_EQ(harmonize_rate(0.25, 120.0), 30.0);
    EXPECT_THROW(harmonize_rate(1.2, 10.0), std::invalid_argument);
}

TEST(RateFromTotals, TonnesOverHectares) {
    EXPECT_DOUBLE_EQ(rate_from_totals(1.0, 1000.0), 1.0);
    EXPECT_DOUBLE_EQ(rate_from_totals(0.0, 7.0), 0.0);
    EXPECT_NEAR(rate_from_totals(123.4, 5678.0), 21.73300457907714, 1e-12);
    EXPECT_THROW(rate_from_totals(5.0, 0.0), std::invalid_argument);
}

TEST(GroupRate, WeightedAverageAndDominanceShortcut) {
    auto single = weighted_group_rate({{42.0, 10.0}});
    EXPECT_DOUBLE_EQ(single.rate, 42.0);
    EXPECT_TRUE(single.single_crop_shortcut);

    auto even = weighted_group_rate({{10.0, 50.0}, {30.0, 50.0}});
    EXPECT_DOUBLE_EQ(even.rate, 20.0);
    EXPECT_FALSE(even.single_crop_shortcut);

    auto dominant = weighted_group_rate({{10.0, 95.0}, {30.0, 5.0}});
    EXPECT_DOUBLE_EQ(dominant.rate, 10.0);
    EXPECT_TRUE(dominant.single_crop_shortcut);

    EXPECT_THROW(weighted_group_rate({{10.0, 0.0}, {20.0, 0.0}}), std::invalid_argument);
}

TEST(GroupRate, WithinMemberRange) {
    Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<std::pair<double, double>> members;
        double lo = 1e18, hi = -1e18;
        const std::size_t n = 1 + rng.uniform(6);
        for (std::size_t i = 0; i < n; ++i) {
            const double rate = rng.uniform_real(0.0, 300.0);
            members.push_back({rate, rng.uniform_real(0.1, 100.0)});
            lo = std::min(lo, rate);
            hi = std::max(hi, rate);
        }
        auto g = weighted_group_rate(members);
        EXPECT_GE(g.rate, lo - 1e-12);
        EXPECT_LE(g.rate, hi + 1e-12);
    }
}

TEST(Oxide, FactorsFromAtomicMasses) {
    EXPECT_DOUBLE_EQ(oxide_conversion('P', 0.0), 0.0);
    EXPECT_NEAR(oxide_conversion('P', 1.0), 2.2914, 1e-3);
    EXPECT_NEAR(oxide_conversion('K', 1.0), 1.2046, 1e-3);
    EXPECT_THROW(oxide_conversion('X', 1.0), std::invalid_argument);
}

TEST(Oxide, Linearity) {
    Rng rng(9);
    for (int rep = 0; rep < 100; ++rep) {
        const double a = rng.uniform_real(0.0, 50.0), b = rng.uniform_real(0.0, 50.0);
        EXPECT_NEAR(oxide_conversion('P', a + b),
                    oxide_conversion('P', a) + oxide_conversion('P', b), 1e-9);
        EXPECT_NEAR(oxide_conversion('K', a + b),
                    oxide_conversion('K', a) + oxide_conversion('K', b), 1e-9);
    }
}

namespace {
RateRecord rec(const std::string& country, const std::string& crop, int year,
               const std::string& nutrient, double rate) {
    return RateRecord{country, crop, year, nutrient, rate};
}
} // namespace

TEST(Anomalies, BoundaryExclusiveCut) {
    std::vector<RateRecord> recs = {rec("A", "Wheat", 2000, "N", 5000.0),
                                    rec("A", "Wheat", 2001, "N", 5001.0),
                                    rec("A", "Wheat", 2002, "N", 12.0)};
    auto out = filter_anomalies(recs);
    EXPECT_EQ(out.kept.size(), 2u);
    EXPECT_EQ(out.removed, 1u);
    EXPECT_DOUBLE_EQ(out.kept[0].rate, 5000.0);

    auto empty = filter_anomalies({});
    EXPECT_TRUE(empty.kept.empty());
    // idempotence
    auto twice = filter_anomalies(out.kept);
    EXPECT_EQ(twice.kept.size(), out.kept.size());
    EXPECT_EQ(twice.removed, 0u);
}

TEST(SelectLabeled, CompleteTriplesOnly) {
    std::vector<RateRecord> recs = {
        rec("A", "Wheat", 2000, "N", 10), rec("A", "Wheat", 2000, "P2O5", 5),
        rec("A", "Wheat", 2000, "K2O", 3), rec("B", "Maize", 2001, "N", 8),
        rec("B", "Maize", 2001, "P2O5", 4)};
    auto out = select_labeled(recs);
    EXPECT_EQ(out.size(), 3u);
    for (const auto& r : out) EXPECT_EQ(r.country, "A");
    EXPECT_TRUE(select_labeled({}).empty());
    // idempotence
    EXPECT_EQ(select_labeled(out).size(), 3u);
}

TEST(OneHot, CropClassFamilyAndGrouping) {
    Table t;
    t.columns = {"crop", "x"};
    for (const auto& c : crop_classes()) t.rows.push_back({c, "1.5"});
    auto enc = one_hot_encode(t, {"crop"});
    EXPECT_EQ(enc.matrix.n_cols, 14u); // 13 crop levels + x
    // exactly one family column active per row
    for (std::size_t r = 0; r < enc.matrix.n_rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 13; ++c) s += enc.matrix.at(r, c);
        EXPECT_DOUBLE_EQ(s, 1.0);
    }
    // grouping: 13 encoded columns share the crop group
    EXPECT_EQ(enc.grouping.group_names.size(), 2u);
    for (std::size_t c = 0; c < 13; ++c) EXPECT_EQ(enc.grouping.group_of_col[c], 0);
    EXPECT_EQ(enc.grouping.group_of_col[13], 1);
}

TEST(OneHot, MissingLevelPropagates) {
    Table t;
    t.columns = {"cat"};
    t.rows = {{"a"}, {""}, {"b"}};
    auto enc = one_hot_encode(t, {"cat"});
    EXPECT_EQ(enc.matrix.n_cols, 2u);
    EXPECT_TRUE(is_missing(enc.matrix.at(1, 0)));
    EXPECT_TRUE(is_missing(enc.matrix.at(1, 1)));
    // 2 rows, levels {a,b}: identity-like block
    EXPECT_DOUBLE_EQ(enc.matrix.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(enc.matrix.at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(enc.matrix.at(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(enc.matrix.at(2, 1), 1.0);
}

TEST(IqrFilter, HandCheckedOutlier) {
    std::vector<double> vals{1, 2, 3, 4, 5, 6, 7, 8, 9, 100};
    auto out = iqr_filter(vals);
    EXPECT_TRUE(out.applied);
    EXPECT_EQ(out.removed, 1u);
    EXPECT_EQ(out.kept.size(), 9u);
    EXPECT_EQ(out.kept.back(), 9.0);
}

TEST(IqrFilter, DegenerateAndSmallInputs) {
    auto all_equal = iqr_filter({5, 5, 5, 5, 5});
    EXPECT_EQ(all_equal.kept.size(), 5u);
    EXPECT_EQ(all_equal.removed, 0u);

    auto tiny = iqr_filter({1, 2, 3});
    EXPECT_FALSE(tiny.applied);
    EXPECT_EQ(tiny.kept.size(), 3u);
}

TEST(IqrFilter, SymmetricRetention) {
    std::vector<double> vals;
    for (int i = -10; i <= 10; ++i) vals.push_back(double(i));
    vals.push_back(-50);
    vals.push_back(50);
    auto out = iqr_filter(vals);
    EXPECT_EQ(out.removed, 2u);
    double s = 0.0;
    for (double v : out.kept) s += v;
    EXPECT_DOUBLE_EQ(s, 0.0);
}

TEST(Deflate, CpiDivision) {
    EXPECT_DOUBLE_EQ(deflate_price(150.0, 1.0), 150.0);
    EXPECT_DOUBLE_EQ(deflate_price(200.0, 2.0), 100.0);
    EXPECT_THROW(deflate_price(10.0, 0.0), std::invalid_argument);
    // deflate then re-inflate round-trips
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double nominal = rng.uniform_real(1.0, 500.0);
        const double cpi = rng.uniform_real(0.2, 5.0);
        EXPECT_NEAR(deflate_price(nominal, cpi) * cpi, nominal, 1e-12 * nominal);
    }
}

TEST(RateIngestion, SeasonLabelsAndDuplicates) {
    EXPECT_EQ(parse_year_label("1996/97"), 1996);
    EXPECT_EQ(parse_year_label("2003"), 2003);
    EXPECT_THROW(parse_year_label("abc"), std::runtime_error);

    Table t;
    t.columns = {"country", "crop", "year", "nutrient", "rate", "source_date"};
    t.rows = {{"A", "Wheat", "1996/97", "N", "50", "1999-01"},
              {"A", "Wheat", "1996", "N", "70", "2005-06"},
              {"A", "Wheat", "1997", "N", "55", "1999-01"}};
    auto recs = read_rate_records(t);
    ASSERT_EQ(recs.size(), 2u);
    // the duplicate (A, Wheat, 1996, N) resolves to the most recent source
    for (const auto& r : recs)
        if (r.year == 1996) EXPECT_DOUBLE_EQ(r.rate, 70.0);
}
