#include <gtest/gtest.h>

#include "fertgrid/downscale.hpp"

using namespace fertgrid;

namespace {

GridSpec tiny(int rows, int cols) {
    GridSpec s;
    s.n_rows = rows;
    s.n_cols = cols;
    s.cell_deg = 0.25;
    s.origin_lat = 0.25 * rows / 2.0;
    s.origin_lon = 0.0;
    return s;
}

} // namespace

TEST(NeighborRatio, ConstantWindowAndMean) {
    GridSpec s = tiny(20, 20);
    Raster crop(s, 0.3), combined(s, 1.0);
    // constant ratio 0.3 everywhere
    EXPECT_NEAR(neighbor_ratio(crop, combined, 10, 10, {5}), 0.3, 1e-12);

    // two valid cells with ratios {0.2, 0.4} inside the window -> 0.3
    Raster crop2(s, 0.0), comb2(s, 0.0);
    crop2.at(9, 9) = 0.2;
    comb2.at(9, 9) = 1.0;
    crop2.at(11, 11) = 0.4;
    comb2.at(11, 11) = 1.0;
    EXPECT_NEAR(neighbor_ratio(crop2, comb2, 10, 10, {5}), 0.3, 1e-12);
}

TEST(NeighborRatio, FirstNonzeroRingWinsOverFullSchedule) {
    // one long row; valid cells sit exactly at ring distances
    GridSpec s = tiny(1, 520);
    Raster crop(s, 0.0), combined(s, 0.0);
    const int center = 260;
    // cell at distance 240 (inside ring 250 only after rings 5..200 fail)
    crop.at(0, center - 240) = 0.8;
    combined.at(0, center - 240) = 1.0;
    EXPECT_NEAR(neighbor_ratio(crop, combined, 0, center), 0.8, 1e-12);

    // adding a closer cell at distance 9 switches selection to ring 10
    crop.at(0, center + 9) = 0.2;
    combined.at(0, center + 9) = 1.0;
    EXPECT_NEAR(neighbor_ratio(crop, combined, 0, center), 0.2, 1e-12);

    // and a cell inside ring 5 takes precedence over everything
    crop.at(0, center - 4) = 0.6;
    combined.at(0, center - 4) = 1.0;
    EXPECT_NEAR(neighbor_ratio(crop, combined, 0, center), 0.6, 1e-12);
}

TEST(NeighborRatio, AllRingsEmptyFallsBackToOne) {
    GridSpec s = tiny(20, 20);
    Raster crop(s, 0.0), combined(s, 0.0);
    EXPECT_DOUBLE_EQ(neighbor_ratio(crop, combined, 10, 10), 1.0);
    // windows full of zero ratios (valid denominators) also fall through
    Raster comb2(s, 1.0);
    EXPECT_DOUBLE_EQ(neighbor_ratio(crop, comb2, 10, 10), 1.0);
}

namespace {

CropMapSet2000 base_world(const GridSpec& s) {
    CropMapSet2000 maps;
    maps.combined_2000 = Raster(s, 0.0, "ha");
    Raster wheat(s, 0.0, "ha"), maize(s, 0.0, "ha");
    for (int r = 0; r < s.n_rows; ++r) {
        for (int c = 0; c < s.n_cols; ++c) {
            if (r >= 2 && c >= 2) { // leave a "new land" margin
                wheat.at(r, c) = 100.0 + 10.0 * r;
                maize.at(r, c) = 50.0 + 5.0 * c;
                maps.combined_2000.at(r, c) = 1.2 * (wheat.at(r, c) + maize.at(r, c));
            }
        }
    }
    maps.harea_2000["Wheat"] = wheat;
    maps.harea_2000["Maize"] = maize;
    return maps;
}

} // namespace

TEST(BuildHarea, BaseYearReproducesItself) {
    GridSpec s = tiny(8, 8);
    auto maps = base_world(s);
    maps.validate();
    YearlyCropland yearly;
    yearly.non_rice[2000] = maps.combined_2000;
    yearly.rice[2000] = Raster(s, 0.0);

    auto got = build_harea_year(maps, yearly, "Wheat", 2000);
    for (int r = 0; r < s.n_rows; ++r)
        for (int c = 0; c < s.n_cols; ++c)
            EXPECT_NEAR(got.at(r, c), maps.harea_2000["Wheat"].at(r, c),
                        1e-9 * std::max(1.0, maps.harea_2000["Wheat"].at(r, c)));
}

TEST(BuildHarea, CroplandChangeScalesLinearly) {
    GridSpec s = tiny(8, 8);
    auto maps = base_world(s);
    YearlyCropland yearly;
    Raster halved = maps.combined_2000;
    for (auto& v : halved.values) v *= 0.5;
    yearly.non_rice[2010] = halved;
    yearly.rice[2010] = Raster(s, 0.0);

    auto got = build_harea_year(maps, yearly, "Wheat", 2010);
    for (int r = 2; r < s.n_rows; ++r)
        for (int c = 2; c < s.n_cols; ++c)
            EXPECT_NEAR(got.at(r, c), 0.5 * maps.harea_2000["Wheat"].at(r, c), 1e-9);
}

TEST(BuildHarea, RiceTakesYearlyLayerVerbatim) {
    GridSpec s = tiny(8, 8);
    auto maps = base_world(s);
    YearlyCropland yearly;
    Raster rice(s, 0.0);
    rice.at(3, 3) = 42.0;
    yearly.rice[1999] = rice;
    yearly.non_rice[1999] = maps.combined_2000;
    auto got = build_harea_year(maps, yearly, "Rice", 1999);
    EXPECT_DOUBLE_EQ(got.at(3, 3), 42.0);
    EXPECT_DOUBLE_EQ(got.at(4, 4), 0.0);
}

TEST(BuildHarea, NewLandUsesNeighborRatioWithUnitFallback) {
    GridSpec s = tiny(8, 8);
    auto maps = base_world(s);
    YearlyCropland yearly;
    Raster expanded = maps.combined_2000;
    expanded.at(0, 0) = 200.0; // newly cultivated; 2000 crop sum is 0 here
    yearly.non_rice[2015] = expanded;
    yearly.rice[2015] = Raster(s, 0.0);

    auto got = build_harea_year(maps, yearly, "Wheat", 2015);
    const double nbr = neighbor_ratio(maps.harea_2000["Wheat"], maps.combined_2000, 0, 0);
    EXPECT_GT(nbr, 0.0);
    EXPECT_NEAR(got.at(0, 0), 200.0 * nbr, 1e-9);

    // all-zero neighborhood: ratio 1, the yearly cropland passes through
    CropMapSet2000 empty_maps;
    empty_maps.combined_2000 = Raster(s, 0.0);
    empty_maps.harea_2000["Wheat"] = Raster(s, 0.0);
    auto fallback = build_harea_year(empty_maps, yearly, "Wheat", 2015);
    EXPECT_DOUBLE_EQ(fallback.at(0, 0), 200.0);
}

TEST(BuildHarea, CappedAtFeasibleArea) {
    GridSpec s = tiny(4, 4);
    CropMapSet2000 maps;
    maps.combined_2000 = Raster(s, 0.0);
    maps.harea_2000["Wheat"] = Raster(s, 0.0);
    YearlyCropland yearly;
    Raster huge(s, 1e9); // far beyond any cell's area
    yearly.non_rice[2001] = huge;
    yearly.rice[2001] = Raster(s, 0.0);
    auto got = build_harea_year(maps, yearly, "Wheat", 2001);
    for (int r = 0; r < s.n_rows; ++r) {
        const double cap = cell_area_ha(s, r);
        for (int c = 0; c < s.n_cols; ++c) EXPECT_LE(got.at(r, c), cap + 1e-9);
    }
}

TEST(Align, UnitScaleWhenAlreadyMatching) {
    GridSpec s = tiny(4, 4);
    Raster harea(s, 10.0), frac(s, 1.0);
    auto cap = feasible_area(s);
    double total = 0.0;
    for (double v : harea.values) total += v;
    auto out = align_to_national(harea, frac, total, cap);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        EXPECT_NEAR(out.values[i], 10.0, 1e-12);
}

TEST(Align, HandTracedCapAndRedistribute) {
    // two cells {60, 40}, feasible 100 each, national total 200:
    // scale -> {120, 80}; cap 120 -> 100, excess 20 to the other -> {100, 100}
    GridSpec s = tiny(1, 2);
    Raster harea(s, 0.0), frac(s, 1.0), cap(s, 100.0);
    harea.at(0, 0) = 60.0;
    harea.at(0, 1) = 40.0;
    auto out = align_to_national(harea, frac, 200.0, cap);
    EXPECT_NEAR(out.at(0, 0), 100.0, 1e-9);
    EXPECT_NEAR(out.at(0, 1), 100.0, 1e-9);
}

TEST(Align, ZeroTotalGivesZeroRaster) {
    GridSpec s = tiny(2, 2);
    Raster harea(s, 5.0), frac(s, 1.0);
    auto out = align_to_national(harea, frac, 0.0, feasible_area(s));
    for (double v : out.values) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Align, Errors) {
    GridSpec s = tiny(2, 2);
    Raster harea(s, 5.0), frac(s, 1.0), cap(s, 10.0);
    EXPECT_THROW(align_to_national(harea, frac, 1000.0, cap), std::runtime_error);
    Raster zeros(s, 0.0);
    EXPECT_THROW(align_to_national(zeros, frac, 10.0, cap), std::runtime_error);
}

TEST(Align, ConservationUnderHeavyCappingFuzz) {
    Rng rng(5);
    GridSpec s = tiny(6, 6);
    auto cap = feasible_area(s);
    double cap_total = 0.0;
    for (double v : cap.values) cap_total += v;
    for (int rep = 0; rep < 100; ++rep) {
        Raster harea(s, 0.0), frac(s, 1.0);
        for (auto& v : harea.values) v = rng.uniform_real(0.0, 50.0);
        double base = 0.0;
        for (double v : harea.values) base += v;
        if (!(base > 0.0)) continue;
        const double total = rng.uniform_real(0.1, 0.95) * cap_total;
        auto out = align_to_national(harea, frac, total, cap);
        double got = 0.0;
        for (double v : out.values) got += v;
        EXPECT_NEAR(got, total, 1e-6 * total);
        for (std::size_t i = 0; i < out.values.size(); ++i)
            EXPECT_LE(out.values[i], cap.values[i] + 1e-9);
    }
}

TEST(JointFeasibility, CommonFactorShrinkAndConservation) {
    GridSpec s = tiny(3, 3);
    Raster cap(s, 100.0);
    std::vector<Raster> layers{Raster(s, 0.0), Raster(s, 0.0)};
    // overfull corner cell, room elsewhere
    layers[0].at(0, 0) = 90.0;
    layers[1].at(0, 0) = 60.0;
    layers[0].at(1, 1) = 10.0;
    layers[1].at(2, 2) = 10.0;
    double sum0 = 100.0, sum1 = 70.0;

    enforce_joint_feasibility(layers, cap);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            EXPECT_LE(layers[0].at(r, c) + layers[1].at(r, c), 100.0 + 1e-9);
    double got0 = 0.0, got1 = 0.0;
    for (double v : layers[0].values) got0 += v;
    for (double v : layers[1].values) got1 += v;
    EXPECT_NEAR(got0, sum0, 1e-9 * sum0);
    EXPECT_NEAR(got1, sum1, 1e-9 * sum1);
    // the overfull cell was shrunk by a common factor
    EXPECT_NEAR(layers[0].at(0, 0) / layers[1].at(0, 0), 90.0 / 60.0, 1e-9);
}

TEST(FertilizerRaster, SingleCountryCell) {
    GridSpec s = tiny(1, 2);
    Raster harea(s, 0.0);
    harea.at(0, 0) = 10.0; // 10 ha at 50 kg/ha -> 500 kg
    Raster frac(s, 0.0);
    frac.at(0, 0) = 1.0;
    auto out = fertilizer_raster(harea, {{&frac, 50.0}});
    EXPECT_DOUBLE_EQ(out.at(0, 0), 500.0);
    EXPECT_DOUBLE_EQ(out.at(0, 1), 0.0); // zero-area cell
}

TEST(FertilizerRaster, BorderCellMixAndFractionCheck) {
    GridSpec s = tiny(1, 1);
    Raster harea(s, 1.0); // 1 ha split 40/60 between rates 10 and 20 -> 16 kg
    Raster fa(s, 0.4), fb(s, 0.6);
    auto out = fertilizer_raster(harea, {{&fa, 10.0}, {&fb, 20.0}});
    EXPECT_DOUBLE_EQ(out.at(0, 0), 16.0);

    Raster too_much(s, 0.7);
    EXPECT_THROW(fertilizer_raster(harea, {{&fa, 10.0}, {&too_much, 20.0}}),
                 std::runtime_error);
}

TEST(Naming, DataRecordsConvention) {
    EXPECT_EQ(raster_filename("Wheat", "N", 1999), "WheatN1999.tiff");
    EXPECT_EQ(raster_filename("OtherCereals", "P2O5", 2019), "OtherCerealsP2O52019.tiff");
}
