#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "fertgrid/geo.hpp"
#include "fertgrid/geotiff.hpp"

using namespace fertgrid;

namespace {

GridSpec small_equator_grid(int rows = 4, int cols = 6, double cell = 5.0 / 60.0) {
    // top edge placed so the grid straddles the equator symmetrically
    GridSpec s;
    s.n_rows = rows;
    s.n_cols = cols;
    s.cell_deg = cell;
    s.origin_lat = cell * rows / 2.0;
    s.origin_lon = 0.0;
    return s;
}

} // namespace

TEST(CellArea, EquatorBandFromStatedFormula) {
    GridSpec s;
    s.n_rows = 2160;
    s.n_cols = 4320;
    s.cell_deg = 5.0 / 60.0;
    s.origin_lat = 90.0;
    s.origin_lon = -180.0;
    // row whose band is [0, 5'] north: row 1079 (top = 5', bottom = 0)
    const double a = cell_area_ha(s, 1079);
    // independent evaluation of A = R^2 * dlon * (sin top - sin bottom)
    const double expect = 6371000.0 * 6371000.0 * (5.0 / 60.0) * (kPi / 180.0) *
                          (std::sin(deg2rad(5.0 / 60.0)) - 0.0) / 1e4;
    EXPECT_NEAR(a, expect, 1e-6);
    EXPECT_NEAR(a, 8586.3, 0.5); // ~8.6 kha per equatorial 5-arcmin cell
}

TEST(CellArea, PolarRowsSmallerAndSphereSumMatches) {
    GridSpec s = GridSpec::global_5arcmin();
    EXPECT_LT(cell_area_ha(s, 0), cell_area_ha(s, s.n_rows / 2));
    double total = 0.0;
    for (int r = 0; r < s.n_rows; ++r) total += cell_area_ha(s, r) * double(s.n_cols);
    const double sphere = 4.0 * kPi * kEarthRadiusM * kEarthRadiusM / 1e4;
    EXPECT_NEAR(total, sphere, 0.005 * sphere);
}

TEST(GeoTiff, RoundTripValuesGridAndNodata) {
    GridSpec s = small_equator_grid();
    Raster r(s, 0.0, "kg");
    Rng rng(3);
    for (auto& v : r.values) v = rng.uniform_real(0.0, 1000.0);
    r.at(1, 2) = kMissing;
    r.at(3, 5) = 0.0;

    const std::string path = (std::filesystem::temp_directory_path() / "fg_test.tiff").string();
    write_geotiff(path, r);
    Raster back = read_geotiff(path);

    EXPECT_TRUE(back.spec == r.spec);
    EXPECT_EQ(back.unit, "kg");
    ASSERT_EQ(back.values.size(), r.values.size());
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (is_missing(r.values[i]))
            EXPECT_TRUE(is_missing(back.values[i]));
        else
            EXPECT_FLOAT_EQ(float(r.values[i]), float(back.values[i]));
    }
    std::remove(path.c_str());
}

TEST(GeoTiff, DeterministicBytes) {
    GridSpec s = small_equator_grid();
    Raster r(s, 1.25, "ha");
    const auto dir = std::filesystem::temp_directory_path();
    const std::string p1 = (dir / "fg_det1.tiff").string();
    const std::string p2 = (dir / "fg_det2.tiff").string();
    write_geotiff(p1, r);
    write_geotiff(p2, r);
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    EXPECT_EQ(sa, sb);
    EXPECT_FALSE(sa.empty());
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST(AggregateEnv, WeightedMeanAndMissingRules) {
    GridSpec s = small_equator_grid(2, 2);
    Raster env(s), area(s), frac(s, 1.0);

    // uniform field -> the constant
    for (auto& v : env.values) v = 7.5;
    area.values = {1.0, 2.0, 0.0, 3.0};
    auto c = aggregate_environmental(env, area, frac);
    ASSERT_TRUE(c.has_value());
    EXPECT_DOUBLE_EQ(*c, 7.5);

    // two cells, env {10, 30}, weights {1, 3} -> 25
    env.values = {10.0, 30.0, 99.0, kMissing};
    area.values = {1.0, 3.0, 0.0, 5.0};
    auto v = aggregate_environmental(env, area, frac);
    ASSERT_TRUE(v.has_value());
    EXPECT_DOUBLE_EQ(*v, 25.0); // nodata env cell excluded from both sums

    // crop absent -> missing, not zero
    area.values = {0.0, 0.0, 0.0, 0.0};
    EXPECT_FALSE(aggregate_environmental(env, area, frac).has_value());
}

TEST(AggregateEnv, OutputWithinContributingRange) {
    Rng rng(11);
    GridSpec s = small_equator_grid(5, 5);
    for (int rep = 0; rep < 50; ++rep) {
        Raster env(s), area(s), frac(s, 1.0);
        double lo = 1e18, hi = -1e18;
        for (std::size_t i = 0; i < s.size(); ++i) {
            env.values[i] = rng.uniform_real(-40.0, 40.0);
            area.values[i] = rng.uniform_real() < 0.3 ? 0.0 : rng.uniform_real(0.0, 9.0);
            if (area.values[i] > 0.0) {
                lo = std::min(lo, env.values[i]);
                hi = std::max(hi, env.values[i]);
            }
        }
        auto v = aggregate_environmental(env, area, frac);
        if (!v.has_value()) continue;
        EXPECT_GE(*v, lo - 1e-12);
        EXPECT_LE(*v, hi + 1e-12);
    }
}

TEST(Climate, DerivedIndices) {
    GridSpec s = small_equator_grid(2, 2);
    std::vector<Raster> pr, tm, pe;
    for (int m = 0; m < 12; ++m) {
        pr.emplace_back(s, 10.0);
        tm.emplace_back(s, 20.0);
        pe.emplace_back(s, 2.0);
    }
    // one cell with MAP 365 to pin aridity = 0.5 at pet 2 mm/day
    for (int m = 0; m < 12; ++m) pr[std::size_t(m)].at(0, 0) = 365.0 / 12.0;

    auto cl = derive_climate(pr, tm, pe);
    EXPECT_NEAR(cl.map.at(1, 1), 120.0, 1e-12);
    EXPECT_NEAR(cl.mat.at(1, 1), 20.0, 1e-12);
    EXPECT_NEAR(cl.pet_annual.at(1, 1), 730.0, 1e-12);
    EXPECT_NEAR(cl.map.at(0, 0), 365.0, 1e-12);
    EXPECT_NEAR(cl.aridity.at(0, 0), 0.5, 1e-12);

    // PET 0 -> aridity nodata
    for (int m = 0; m < 12; ++m) pe[std::size_t(m)].at(0, 1) = 0.0;
    cl = derive_climate(pr, tm, pe);
    EXPECT_TRUE(is_missing(cl.aridity.at(0, 1)));

    EXPECT_THROW(derive_climate({pr[0]}, tm, pe), std::invalid_argument);
}

TEST(CostDistance, SourceZeroAndUniformRun) {
    // single row of cells centred on the equator
    GridSpec s;
    s.n_rows = 1;
    s.n_cols = 12;
    s.cell_deg = 5.0 / 60.0;
    s.origin_lat = s.cell_deg / 2.0; // centers at latitude 0
    s.origin_lon = 0.0;

    const double f = 0.37;
    Raster friction(s, f);
    auto out = cost_distance(friction, {{0, 0}});
    EXPECT_DOUBLE_EQ(out.at(0, 0), 0.0);

    const double step = center_distance_m(s, 0, 0, 0, 1);
    for (int c = 1; c < s.n_cols; ++c)
        EXPECT_NEAR(out.at(0, c), double(c) * f * step, 1e-9 * double(c) * f * step);

    // doubling friction doubles every finite cost
    Raster friction2(s, 2.0 * f);
    auto out2 = cost_distance(friction2, {{0, 0}});
    for (int c = 0; c < s.n_cols; ++c)
        EXPECT_NEAR(out2.at(0, c), 2.0 * out.at(0, c), 1e-9 * std::max(1.0, out.at(0, c)));
}

TEST(CostDistance, UnreachableAndErrors) {
    GridSpec s = small_equator_grid(3, 5);
    Raster friction(s, 1.0);
    for (int r = 0; r < 3; ++r) friction.at(r, 2) = kMissing; // wall
    auto out = cost_distance(friction, {{1, 0}});
    for (int r = 0; r < 3; ++r) {
        EXPECT_TRUE(is_missing(out.at(r, 2)));
        EXPECT_TRUE(is_missing(out.at(r, 4)));
        EXPECT_FALSE(is_missing(out.at(r, 1)));
    }
    EXPECT_THROW(cost_distance(friction, {}), std::invalid_argument);
    EXPECT_THROW(cost_distance(friction, {{0, 2}}), std::invalid_argument);
}

TEST(CostDistance, TriangleInequalityOnRandomGrids) {
    Rng rng(19);
    for (int rep = 0; rep < 20; ++rep) {
        GridSpec s = small_equator_grid(6, 6);
        Raster friction(s, 0.0);
        for (auto& v : friction.values) v = rng.uniform_real(0.1, 5.0);
        std::vector<Cell> a{{int(rng.uniform(6)), int(rng.uniform(6))}};
        std::vector<Cell> b{{int(rng.uniform(6)), int(rng.uniform(6))}};
        auto da = cost_distance(friction, a);
        auto db = cost_distance(friction, b);
        std::vector<Cell> ab{a[0], b[0]};
        auto dab = cost_distance(friction, ab);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double m = std::min(da.values[i], db.values[i]);
            EXPECT_NEAR(dab.values[i], m, 1e-9 * std::max(1.0, m));
        }
        // local Lipschitz bound between neighbours
        for (int r = 0; r + 1 < 6; ++r)
            for (int c = 0; c < 6; ++c) {
                const double w = 0.5 * (friction.at(r, c) + friction.at(r + 1, c)) *
                                 center_distance_m(s, r, c, r + 1, c);
                EXPECT_LE(std::abs(da.at(r, c) - da.at(r + 1, c)), w + 1e-9);
            }
    }
}
