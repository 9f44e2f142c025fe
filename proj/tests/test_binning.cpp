#include <gtest/gtest.h>

#include <algorithm>

#include "fertgrid/binning.hpp"

using namespace fertgrid;

namespace {

FeatureMatrix one_column(const std::vector<double>& vals) {
    FeatureMatrix m(vals.size(), 1);
    for (std::size_t r = 0; r < vals.size(); ++r) m.set(r, 0, vals[r]);
    return m;
}

} // namespace

TEST(Binning, FewerDistinctValuesThanBins) {
    auto m = one_column({1, 2, 3, 4});
    auto bm = build_bins(m, 4);
    ASSERT_EQ(bm.cols[0].n_bins(), 4);
    EXPECT_EQ(bm.cols[0].edges, (std::vector<double>{1.5, 2.5, 3.5}));
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(bm.codes[0][r], r);
}

TEST(Binning, AllMissingColumn) {
    auto m = one_column({kMissing, kMissing, kMissing});
    auto bm = build_bins(m, 8);
    EXPECT_TRUE(bm.cols[0].edges.empty());
    for (std::size_t r = 0; r < 3; ++r)
        EXPECT_EQ(bm.codes[0][r], bm.cols[0].missing_bin());
}

TEST(Binning, UniformDrawsBalancedBins) {
    Rng rng(7);
    std::vector<double> vals(1000);
    for (double& v : vals) v = rng.uniform_real();
    auto m = one_column(vals);
    auto bm = build_bins(m, 8);
    ASSERT_EQ(bm.cols[0].n_bins(), 8);

    // sort-and-slice oracle: cut the sorted sample into 8 equal slices and
    // count how many land in each library bin
    std::vector<int> counts(9, 0);
    for (std::size_t r = 0; r < vals.size(); ++r) counts[bm.codes[0][r]]++;
    for (int b = 0; b < 8; ++b) {
        EXPECT_GE(counts[b], 124) << "bin " << b;
        EXPECT_LE(counts[b], 126) << "bin " << b;
    }
    EXPECT_EQ(counts[8], 0);
}

TEST(Binning, EmptyMatrixIsError) {
    FeatureMatrix m;
    EXPECT_THROW(build_bins(m, 8), std::runtime_error);
}

TEST(Binning, BinaryColumnsGetTwoBins) {
    FeatureMatrix m(3, 1);
    m.col_kinds[0] = ColKind::OneHotBinary;
    m.set(0, 0, 0.0);
    m.set(1, 0, 1.0);
    m.set(2, 0, kMissing);
    auto bm = build_bins(m, 256);
    EXPECT_EQ(bm.cols[0].n_bins(), 2);
    EXPECT_EQ(bm.codes[0][0], 0);
    EXPECT_EQ(bm.codes[0][1], 1);
    EXPECT_EQ(bm.codes[0][2], 2);
}

TEST(Binning, MissingAlwaysMapsToReservedBin) {
    Rng rng(3);
    FeatureMatrix m(500, 2);
    for (std::size_t r = 0; r < 500; ++r) {
        m.set(r, 0, rng.uniform_real() < 0.3 ? kMissing : rng.normal());
        m.set(r, 1, rng.normal());
    }
    auto bm = build_bins(m, 16);
    for (std::size_t r = 0; r < 500; ++r) {
        if (is_missing(m.at(r, 0)))
            EXPECT_EQ(bm.codes[0][r], bm.cols[0].missing_bin());
        else
            EXPECT_LT(bm.codes[0][r], bm.cols[0].missing_bin());
    }
    // edges strictly increasing
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 1; i < bm.cols[c].edges.size(); ++i)
            EXPECT_LT(bm.cols[c].edges[i - 1], bm.cols[c].edges[i]);
}
