#pragma once
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/grid.hpp"

namespace fertgrid {

// Base-year crop maps: one harvested-area raster per crop class plus the
// combined (non-rice) cropland layer they were carved from.
struct CropMapSet2000 {
    std::map<std::string, Raster> harea_2000; // crop class -> ha
    Raster combined_2000;                     // non-rice cropland, ha

    // per-cell crop sum may not exceed the combined layer beyond tolerance;
    // rice is excluded because it rides its own cropland series
    void validate(double rel_tol = 1e-6) const {
        for (const auto& [crop, r] : harea_2000) {
            require_same_grid(r, combined_2000);
            for (double v : r.values)
                if (!is_missing(v) && v < 0.0)
                    throw std::invalid_argument("CropMapSet2000: negative area in " + crop);
        }
        for (std::size_t i = 0; i < combined_2000.values.size(); ++i) {
            double sum = 0.0;
            for (const auto& [crop, r] : harea_2000)
                if (crop != "Rice" && !is_missing(r.values[i])) sum += r.values[i];
            const double comb = is_missing(combined_2000.values[i]) ? 0.0
                                                                    : combined_2000.values[i];
            if (sum > comb * (1.0 + rel_tol) + 1e-9)
                throw std::invalid_argument("CropMapSet2000: crop sum exceeds combined layer");
        }
    }

    Raster crop_sum() const {
        Raster out(combined_2000.spec, 0.0, "ha");
        for (const auto& [_, r] : harea_2000)
            for (std::size_t i = 0; i < out.values.size(); ++i)
                if (!is_missing(r.values[i])) out.values[i] += r.values[i];
        return out;
    }
};

// Yearly rice / non-rice cropland layers.
struct YearlyCropland {
    std::map<int, Raster> rice;
    std::map<int, Raster> non_rice;

    const Raster& rice_year(int year) const {
        auto it = rice.find(year);
        if (it == rice.end())
            throw std::runtime_error("missing rice cropland layer for " + std::to_string(year));
        return it->second;
    }
    const Raster& non_rice_year(int year) const {
        auto it = non_rice.find(year);
        if (it == non_rice.end())
            throw std::runtime_error("missing cropland layer for " + std::to_string(year));
        return it->second;
    }
};

inline const std::vector<int>& neighbor_rings() {
    static const std::vector<int> k = {5, 10, 25, 50, 100, 150, 200, 250};
    return k;
}

// Mean base-year crop/cropland ratio over a progressively expanding square
// window; the first ring whose mean is nonzero wins, and 1 is the fallback
// when every ring comes up empty or zero.
inline double neighbor_ratio(const Raster& base_map, const Raster& combined_2000, int row,
                             int col, const std::vector<int>& rings = neighbor_rings()) {
    require_same_grid(base_map, combined_2000);
    if (!base_map.in_range(row, col))
        throw std::invalid_argument("neighbor_ratio: cell out of range");
    for (int k : rings) {
        double sum = 0.0;
        std::size_t n = 0;
        const int r0 = std::max(0, row - k), r1 = std::min(base_map.spec.n_rows - 1, row + k);
        const int c0 = std::max(0, col - k), c1 = std::min(base_map.spec.n_cols - 1, col + k);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double denom = combined_2000.at(r, c);
                if (is_missing(denom) || !(denom > 0.0)) continue;
                const double num = base_map.at(r, c);
                sum += (is_missing(num) ? 0.0 : num) / denom;
                n++;
            }
        }
        if (n > 0 && sum != 0.0) return sum / double(n);
    }
    return 1.0;
}

// Harvested-area layer for one (crop, year): rice takes the yearly rice
// cropland verbatim; non-rice scales the yearly cropland by the base-year
// crop share, with the neighbor ratio on newly cultivated cells. Cells are
// truncated at the spherical feasible area.
inline Raster build_harea_year(const CropMapSet2000& maps, const YearlyCropland& yearly,
                               const std::string& crop, int year) {
    const bool rice = crop == "Rice";
    const Raster& carea = rice ? yearly.rice_year(year) : yearly.non_rice_year(year);
    require_same_grid(carea, maps.combined_2000);

    Raster out(carea.spec, 0.0, "ha");
    if (rice) {
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            const double v = carea.values[i];
            out.values[i] = is_missing(v) ? 0.0 : std::max(0.0, v);
        }
    } else {
        auto it = maps.harea_2000.find(crop);
        if (it == maps.harea_2000.end())
            throw std::runtime_error("missing base-year crop map for " + crop);
        const Raster& base = it->second;
        const Raster total = maps.crop_sum();
        for (int r = 0; r < out.spec.n_rows; ++r) {
            for (int c = 0; c < out.spec.n_cols; ++c) {
                const double cy = carea.at(r, c);
                if (is_missing(cy) || !(cy > 0.0)) continue;
                const double prior = total.at(r, c);
                const double denom = is_missing(maps.combined_2000.at(r, c))
                                         ? 0.0
                                         : maps.combined_2000.at(r, c);
                double ratio;
                if (prior > 0.0 && denom > 0.0) {
                    const double num = base.at(r, c);
                    ratio = (is_missing(num) ? 0.0 : num) / denom;
                } else {
                    ratio = neighbor_ratio(base, maps.combined_2000, r, c);
                }
                out.at(r, c) = cy * ratio;
            }
        }
    }
    for (int r = 0; r < out.spec.n_rows; ++r) {
        const double cap = cell_area_ha(out.spec, r);
        for (int c = 0; c < out.spec.n_cols; ++c)
            if (out.at(r, c) > cap) out.at(r, c) = cap;
    }
    return out;
}

// The spherical feasible area per cell, ha.
inline Raster feasible_area(const GridSpec& spec) {
    Raster out(spec, 0.0, "ha");
    for (int r = 0; r < spec.n_rows; ++r) {
        const double a = cell_area_ha(spec, r);
        for (int c = 0; c < spec.n_cols; ++c) out.at(r, c) = a;
    }
    return out;
}

// Scale one country's portion of a harvested-area layer to the national
// total, then cap cells at the feasible area and redistribute any excess
// proportionally across uncapped cells until nothing overflows (at most
// max_rounds rounds; a residual below rel_tol of the total is truncated).
// Returns the per-country portion layer.
inline Raster align_to_national(const Raster& harea, const Raster& country_frac,
                                double national_total, const Raster& capacity,
                                int max_rounds = 100, double rel_tol = 1e-6) {
    require_same_grid(harea, country_frac);
    require_same_grid(harea, capacity);
    if (national_total < 0.0)
        throw std::invalid_argument("align_to_national: negative national total");

    const std::size_t n = harea.values.size();
    Raster portion(harea.spec, 0.0, harea.unit);
    if (national_total == 0.0) return portion;

    double current = 0.0, cap_total = 0.0;
    std::vector<double> cap(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = is_missing(country_frac.values[i]) ? 0.0 : country_frac.values[i];
        if (f <= 0.0) continue;
        const double h = is_missing(harea.values[i]) ? 0.0 : harea.values[i];
        portion.values[i] = h * f;
        current += portion.values[i];
        cap[i] = capacity.values[i] * f;
        cap_total += cap[i];
    }
    if (national_total > cap_total * (1.0 + rel_tol))
        throw InfeasibleError("infeasible national total: " + std::to_string(national_total) +
                              " ha > feasible " + std::to_string(cap_total) + " ha");
    if (!(current > 0.0))
        throw std::runtime_error("align_to_national: modeled area sums to zero with a positive total");

    const double s = national_total / current;
    for (std::size_t i = 0; i < n; ++i) portion.values[i] *= s;

    std::vector<bool> capped(n, false);
    double excess = 0.0;
    for (int round = 0; round < max_rounds; ++round) {
        excess = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (portion.values[i] > cap[i]) {
                excess += portion.values[i] - cap[i];
                portion.values[i] = cap[i];
                capped[i] = true;
            }
        }
        if (excess == 0.0) break;
        double weight = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!capped[i] && portion.values[i] > 0.0) weight += portion.values[i];
        if (!(weight > 0.0)) {
            if (excess <= rel_tol * national_total) { excess = 0.0; break; }
            throw std::runtime_error("align_to_national: no uncapped cells left to absorb excess");
        }
        const double k = excess / weight;
        for (std::size_t i = 0; i < n; ++i)
            if (!capped[i] && portion.values[i] > 0.0) portion.values[i] *= 1.0 + k;
        excess = 0.0;
    }
    // residual overflow after the round limit: truncate if within tolerance
    double leftover = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (portion.values[i] > cap[i]) {
            leftover += portion.values[i] - cap[i];
            portion.values[i] = cap[i];
        }
    if (leftover > rel_tol * national_total)
        throw std::runtime_error("align_to_national: cap-and-redistribute did not converge");
    return portion;
}

// Joint feasibility across crop layers: where the per-cell sum exceeds the
// capacity, all layers shrink by a common factor and each layer's removed
// mass is redistributed proportionally over its own uncapped positive cells.
inline void enforce_joint_feasibility(std::vector<Raster>& layers, const Raster& capacity,
                                      int max_rounds = 100, double rel_tol = 1e-6) {
    if (layers.empty()) return;
    for (const auto& l : layers) require_same_grid(l, capacity);
    const std::size_t n = capacity.values.size();

    std::vector<bool> capped(n, false);
    for (int round = 0; round < max_rounds; ++round) {
        std::vector<double> moved(layers.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (const auto& l : layers) total += l.values[i];
            if (total > capacity.values[i]) {
                const double shrink = capacity.values[i] / total;
                for (std::size_t c = 0; c < layers.size(); ++c) {
                    const double removed = layers[c].values[i] * (1.0 - shrink);
                    layers[c].values[i] -= removed;
                    moved[c] += removed;
                }
                capped[i] = true;
            }
        }
        double total_moved = 0.0;
        for (double m : moved) total_moved += m;
        if (total_moved == 0.0) return;
        for (std::size_t c = 0; c < layers.size(); ++c) {
            if (moved[c] == 0.0) continue;
            double weight = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (!capped[i] && layers[c].values[i] > 0.0) weight += layers[c].values[i];
            if (!(weight > 0.0)) {
                double layer_sum = 0.0;
                for (std::size_t i = 0; i < n; ++i) layer_sum += layers[c].values[i];
                if (moved[c] <= rel_tol * std::max(1.0, layer_sum)) continue;
                throw std::runtime_error("joint feasibility: nowhere to place excess area");
            }
            const double k = moved[c] / weight;
            for (std::size_t i = 0; i < n; ++i)
                if (!capped[i] && layers[c].values[i] > 0.0) layers[c].values[i] *= 1.0 + k;
        }
    }
    // verify nothing still overflows beyond tolerance
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (const auto& l : layers) total += l.values[i];
        if (total > capacity.values[i] * (1.0 + rel_tol) + 1e-9)
            throw std::runtime_error("joint feasibility: did not converge");
    }
}

// Country rate paired with that country's cell-fraction raster.
struct CountryRateLayer {
    const Raster* frac = nullptr;
    double rate_kg_ha = 0.0;
};

// Fertilizer mass per cell: harvested area times the fraction-weighted sum of
// country rates.
inline Raster fertilizer_raster(const Raster& harea, const std::vector<CountryRateLayer>& rates) {
    Raster out(harea.spec, 0.0, "kg");
    for (const auto& cr : rates) require_same_grid(harea, *cr.frac);
    const std::size_t n = harea.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        double frac_sum = 0.0, rate_mix = 0.0;
        for (const auto& cr : rates) {
            const double f = is_missing(cr.frac->values[i]) ? 0.0 : cr.frac->values[i];
            if (f <= 0.0) continue;
            frac_sum += f;
            rate_mix += cr.rate_kg_ha * f;
        }
        if (frac_sum > 1.0 + 1e-9)
            throw std::runtime_error("fertilizer_raster: country fractions sum above 1 in a cell");
        const double h = is_missing(harea.values[i]) ? 0.0 : harea.values[i];
        out.values[i] = h * rate_mix;
    }
    return out;
}

// Data Records naming: {CropName}{Fertilizer}{Year}.tiff
inline std::string raster_filename(const std::string& crop, const std::string& nutrient,
                                   int year) {
    return crop + nutrient + std::to_string(year) + ".tiff";
}

} // namespace fertgrid
