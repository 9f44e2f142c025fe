#pragma once
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/csv.hpp"

namespace fertgrid {

// Sparse (year, value) series.
using YearSeries = std::map<int, double>;

struct MaeMape {
    double mae = 0.0;
    double mape = 0.0;       // percent
    std::size_t n = 0;       // overlapping years (MAE sample size)
    std::size_t mape_n = 0;  // years entering MAPE
    std::size_t zero_ref_excluded = 0;
};

// MAE and MAPE over overlapping years. Reference zeros are excluded from the
// MAPE terms (and counted) but kept in the MAE.
inline MaeMape mae_mape(const YearSeries& pred, const YearSeries& ref) {
    MaeMape out;
    double abs_sum = 0.0, pct_sum = 0.0;
    for (const auto& [year, p] : pred) {
        auto it = ref.find(year);
        if (it == ref.end()) continue;
        const double r = it->second;
        abs_sum += std::abs(p - r);
        out.n++;
        if (r == 0.0) {
            out.zero_ref_excluded++;
        } else {
            pct_sum += std::abs(p - r) / std::abs(r);
            out.mape_n++;
        }
    }
    if (out.n == 0) throw std::runtime_error("mae_mape: no overlapping year");
    out.mae = abs_sum / double(out.n);
    out.mape = out.mape_n ? 100.0 * pct_sum / double(out.mape_n) : 0.0;
    return out;
}

// Element-wise N + P2O5 + K2O; a year missing any component is dropped.
inline YearSeries npk_sum_series(const YearSeries& n, const YearSeries& p, const YearSeries& k) {
    YearSeries out;
    for (const auto& [year, nv] : n) {
        auto ip = p.find(year);
        auto ik = k.find(year);
        if (ip == p.end() || ik == k.end()) continue;
        out[year] = nv + ip->second + ik->second;
    }
    return out;
}

struct ComparisonRow {
    std::string country;
    std::string crop;
    std::optional<MaeMape> n, p2o5, k2o, npk;

    std::size_t n_years() const {
        std::size_t best = 0;
        for (const auto* m : {&n, &p2o5, &k2o, &npk})
            if (m->has_value()) best = std::max(best, (*m)->n);
        return best;
    }
};

// Validation table mirroring the national-database comparison layout: one row
// per (country, crop), NA where a nutrient column is absent, sample size in
// parentheses after the crop name. Ordering is (country, crop); duplicate
// keys are an error.
inline Table emit_validation_table(std::vector<ComparisonRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.country, a.crop) < std::tie(b.country, b.crop);
    });
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : rows)
        if (!seen.insert({r.country, r.crop}).second)
            throw std::runtime_error("duplicate validation key: " + r.country + "/" + r.crop);

    auto fmt = [](double v) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(2);
        s << v;
        return s.str();
    };

    Table t;
    t.columns = {"country", "crop",     "mae_n",    "mape_n",  "mae_p2o5", "mape_p2o5",
                 "mae_k2o", "mape_k2o", "mae_npk", "mape_npk"};
    for (const auto& r : rows) {
        std::vector<std::string> row;
        row.push_back(r.country);
        row.push_back(r.crop + " (" + std::to_string(r.n_years()) + ")");
        for (const auto* m : {&r.n, &r.p2o5, &r.k2o, &r.npk}) {
            if (m->has_value()) {
                row.push_back(fmt((*m)->mae));
                row.push_back(fmt((*m)->mape));
            } else {
                row.push_back("NA");
                row.push_back("NA");
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// Per-series comparison export for external plotting: (year, pred, ref).
inline Table comparison_series_table(const YearSeries& pred, const YearSeries& ref) {
    Table t;
    t.columns = {"year", "pred", "ref"};
    for (const auto& [year, p] : pred) {
        auto it = ref.find(year);
        if (it == ref.end()) continue;
        t.rows.push_back({std::to_string(year), format_cell(p), format_cell(it->second)});
    }
    return t;
}

} // namespace fertgrid
