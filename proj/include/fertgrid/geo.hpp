#pragma once
#include <optional>
#include <queue>
#include <vector>

#include "fertgrid/grid.hpp"

namespace fertgrid {

// Crop-area-weighted mean of an environmental field over the cells where the
// crop is located inside the country. Nodata env cells drop out of both sums;
// zero total weight is "missing", never zero.
inline std::optional<double> aggregate_environmental(const Raster& env,
                                                     const Raster& crop_area_2000,
                                                     const Raster& country_frac) {
    require_same_grid(env, crop_area_2000);
    require_same_grid(env, country_frac);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < env.values.size(); ++i) {
        const double area = crop_area_2000.values[i];
        const double frac = country_frac.values[i];
        if (is_missing(area) || is_missing(frac)) continue;
        if (!(area > 0.0) || !(frac > 0.0)) continue;
        const double e = env.values[i];
        if (is_missing(e)) continue;
        const double w = area * frac;
        num += e * w;
        den += w;
    }
    if (!(den > 0.0)) return std::nullopt;
    return num / den;
}

struct ClimateRasters {
    Raster map;        // mm/year
    Raster mat;        // deg C
    Raster pet_annual; // mm/year
    Raster aridity;    // MAP / annual PET
};

inline const int* month_days() {
    static const int k[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return k;
}

// MAP = sum of monthly precipitation; MAT = day-weighted mean temperature;
// annual PET = sum of (daily mean x days); aridity = MAP / PET.
inline ClimateRasters derive_climate(const std::vector<Raster>& precip_monthly,
                                     const std::vector<Raster>& temp_monthly,
                                     const std::vector<Raster>& pet_daily_monthly) {
    if (precip_monthly.size() != 12 || temp_monthly.size() != 12 ||
        pet_daily_monthly.size() != 12)
        throw std::invalid_argument("derive_climate: 12 monthly layers per variable required");
    const GridSpec& spec = precip_monthly[0].spec;
    for (const auto& r : precip_monthly) require_same_grid(precip_monthly[0], r);
    for (const auto& r : temp_monthly) require_same_grid(precip_monthly[0], r);
    for (const auto& r : pet_daily_monthly) require_same_grid(precip_monthly[0], r);

    ClimateRasters out{Raster(spec, 0.0, "mm/year"), Raster(spec, 0.0, "degC"),
                       Raster(spec, 0.0, "mm/year"), Raster(spec, 0.0, "ratio")};
    double year_days = 0.0;
    for (int m = 0; m < 12; ++m) year_days += month_days()[m];

    for (std::size_t i = 0; i < spec.size(); ++i) {
        double map_v = 0.0, mat_num = 0.0, pet_v = 0.0;
        bool any_missing = false;
        for (int m = 0; m < 12; ++m) {
            const double pr = precip_monthly[std::size_t(m)].values[i];
            const double tm = temp_monthly[std::size_t(m)].values[i];
            const double pe = pet_daily_monthly[std::size_t(m)].values[i];
            if (is_missing(pr) || is_missing(tm) || is_missing(pe)) {
                any_missing = true;
                break;
            }
            map_v += pr;
            mat_num += tm * double(month_days()[m]);
            pet_v += pe * double(month_days()[m]);
        }
        if (any_missing) {
            out.map.values[i] = kMissing;
            out.mat.values[i] = kMissing;
            out.pet_annual.values[i] = kMissing;
            out.aridity.values[i] = kMissing;
            continue;
        }
        out.map.values[i] = map_v;
        out.mat.values[i] = mat_num / year_days;
        out.pet_annual.values[i] = pet_v;
        out.aridity.values[i] = pet_v > 0.0 ? map_v / pet_v : kMissing;
    }
    return out;
}

struct Cell {
    int row = 0;
    int col = 0;
};

// Multi-source least accumulated cost over 8-connected cells. Edge weight is
// the mean friction of the two cells times the great-circle center distance.
// Friction <= 0 or nodata marks an untraversable cell; unreachable cells stay
// nodata.
inline Raster cost_distance(const Raster& friction, const std::vector<Cell>& sources) {
    if (sources.empty()) throw std::invalid_argument("cost_distance: no source");
    const GridSpec& spec = friction.spec;
    Raster out(spec, kMissing, "cost");

    using QItem = std::pair<double, std::size_t>; // (cost, flat index)
    std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> pq;
    std::vector<double> dist(spec.size(), std::numeric_limits<double>::infinity());

    auto idx = [&](int r, int c) { return std::size_t(r) * std::size_t(spec.n_cols) + std::size_t(c); };
    auto traversable = [&](int r, int c) {
        const double fv = friction.at(r, c);
        return !is_missing(fv) && fv > 0.0;
    };

    for (const Cell& s : sources) {
        if (!friction.in_range(s.row, s.col))
            throw std::invalid_argument("cost_distance: source out of range");
        if (!traversable(s.row, s.col))
            throw std::invalid_argument("cost_distance: source on untraversable cell");
        dist[idx(s.row, s.col)] = 0.0;
        pq.push({0.0, idx(s.row, s.col)});
    }

    while (!pq.empty()) {
        auto [d, i] = pq.top();
        pq.pop();
        if (d > dist[i]) continue;
        const int r = int(i / std::size_t(spec.n_cols));
        const int c = int(i % std::size_t(spec.n_cols));
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const int nr = r + dr, nc = c + dc;
                if (!friction.in_range(nr, nc) || !traversable(nr, nc)) continue;
                const double w = 0.5 * (friction.at(r, c) + friction.at(nr, nc)) *
                                 center_distance_m(spec, r, c, nr, nc);
                const double nd = d + w;
                if (nd < dist[idx(nr, nc)]) {
                    dist[idx(nr, nc)] = nd;
                    pq.push({nd, idx(nr, nc)});
                }
            }
        }
    }

    for (std::size_t i = 0; i < spec.size(); ++i)
        if (std::isfinite(dist[i])) out.values[i] = dist[i];
    return out;
}

} // namespace fertgrid
