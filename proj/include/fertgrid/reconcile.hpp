#pragma once
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/common.hpp"

namespace fertgrid {

// National nutrient budget for one (country, nutrient, year).
struct CountryBudget {
    std::string country;
    std::string nutrient;
    int year = 0;
    double total_use_t = 0.0;  // all agricultural use, tonnes
    double grass_share = 0.0;  // fraction to grasslands and fodder crops
    double net_budget_t = 0.0; // cropland budget, tonnes

    void validate() const {
        if (grass_share < 0.0 || grass_share > 1.0)
            throw std::invalid_argument("CountryBudget: share outside [0,1]");
        if (std::abs(net_budget_t - total_use_t * (1.0 - grass_share)) >
            1e-12 * std::max(1.0, total_use_t))
            throw std::invalid_argument("CountryBudget: net_budget inconsistent");
        if (net_budget_t < 0.0) throw std::invalid_argument("CountryBudget: negative budget");
    }
};

// Cropland budget after removing the grassland/fodder fraction.
inline double net_budget(double total_use_t, double grass_share) {
    if (grass_share < 0.0 || grass_share > 1.0)
        throw std::invalid_argument("net_budget: share outside [0,1]");
    if (total_use_t < 0.0) throw std::invalid_argument("net_budget: negative total");
    return total_use_t * (1.0 - grass_share);
}

inline CountryBudget make_budget(const std::string& country, const std::string& nutrient,
                                 int year, double total_use_t, double grass_share) {
    CountryBudget b;
    b.country = country;
    b.nutrient = nutrient;
    b.year = year;
    b.total_use_t = total_use_t;
    b.grass_share = grass_share;
    b.net_budget_t = net_budget(total_use_t, grass_share);
    return b;
}

struct AdjustedRates {
    std::vector<double> rates; // kg/ha, same order as the inputs
    double scale = 1.0;
};

// Scale all crop rates of one (country, nutrient, year) by a single factor so
// the implied mass total meets the net budget. The printed form of the source
// equation multiplies by predicted/reported, which moves totals away from the
// reported ones; the stated alignment intent requires the reciprocal, which
// is what this computes.
inline AdjustedRates adjust_predictions(const std::vector<double>& pred_rates_kg_ha,
                                        const std::vector<double>& areas_ha,
                                        const CountryBudget& budget) {
    if (pred_rates_kg_ha.size() != areas_ha.size())
        throw std::invalid_argument("adjust_predictions: rate/area length mismatch");
    budget.validate();
    double implied_kg = 0.0;
    for (std::size_t i = 0; i < pred_rates_kg_ha.size(); ++i) {
        if (pred_rates_kg_ha[i] < 0.0 || areas_ha[i] < 0.0)
            throw std::invalid_argument("adjust_predictions: negative rate or area");
        implied_kg += pred_rates_kg_ha[i] * areas_ha[i];
    }
    const double budget_kg = budget.net_budget_t * 1000.0;

    AdjustedRates out;
    if (budget_kg == 0.0) {
        out.scale = 0.0;
        out.rates.assign(pred_rates_kg_ha.size(), 0.0);
        return out;
    }
    if (!(implied_kg > 0.0))
        throw std::runtime_error("adjust_predictions: nothing to scale for " + budget.country +
                                 " " + budget.nutrient + " " + std::to_string(budget.year));
    out.scale = budget_kg / implied_kg;
    out.rates.reserve(pred_rates_kg_ha.size());
    for (double r : pred_rates_kg_ha) out.rates.push_back(r * out.scale);
    return out;
}

} // namespace fertgrid
