#pragma once
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/matrix.hpp"
#include "fertgrid/shap.hpp"

namespace fertgrid {

// ----------------------------------------------------------------------------
// Domain vocabulary
// ----------------------------------------------------------------------------

inline const std::vector<std::string>& crop_classes() {
    static const std::vector<std::string> k = {
        "Wheat",      "Maize",        "Rice",       "OtherCereals", "Soybean",
        "PalmFruit",  "OtherOilseeds", "Vegetables", "Fruits",       "RootsTubers",
        "SugarCrops", "FiberCrops",   "OtherCrops"};
    return k;
}

inline const std::vector<std::string>& nutrients() {
    static const std::vector<std::string> k = {"N", "P2O5", "K2O"};
    return k;
}

inline bool is_crop_class(const std::string& s) {
    const auto& k = crop_classes();
    return std::find(k.begin(), k.end(), s) != k.end();
}

inline bool is_nutrient(const std::string& s) {
    const auto& k = nutrients();
    return std::find(k.begin(), k.end(), s) != k.end();
}

// One label: (country, crop class, year, nutrient) -> application rate kg/ha.
struct RateRecord {
    std::string country;
    std::string crop_class;
    int year = 0;
    std::string nutrient;
    double rate = 0.0; // kg/ha over total crop area

    void validate() const {
        if (!is_crop_class(crop_class))
            throw std::invalid_argument("unknown crop class: " + crop_class);
        if (!is_nutrient(nutrient)) throw std::invalid_argument("unknown nutrient: " + nutrient);
        if (!(rate >= 0.0)) throw std::invalid_argument("rate must be >= 0");
    }
};

enum class FeatureCategory { Environmental, Agrological, Socioeconomic };

inline std::string to_string(FeatureCategory c) {
    switch (c) {
        case FeatureCategory::Environmental: return "environmental";
        case FeatureCategory::Agrological: return "agrological";
        default: return "socioeconomic";
    }
}

// Feature name -> category/unit/applicable nutrients ("all" or a subset).
struct FeatureRegistry {
    struct Entry {
        FeatureCategory category = FeatureCategory::Agrological;
        std::string unit;
        std::set<std::string> nutrients; // empty = all
    };
    std::map<std::string, Entry> entries;

    void add(const std::string& name, FeatureCategory cat, const std::string& unit = "",
             std::set<std::string> nuts = {}) {
        entries[name] = Entry{cat, unit, std::move(nuts)};
    }

    const Entry& lookup(const std::string& name) const {
        auto it = entries.find(name);
        if (it == entries.end()) throw std::runtime_error("unregistered feature: " + name);
        return it->second;
    }

    bool applies(const std::string& name, const std::string& nutrient) const {
        const Entry& e = lookup(name);
        return e.nutrients.empty() || e.nutrients.count(nutrient) > 0;
    }
};

// ----------------------------------------------------------------------------
// Rate harmonization and unit conversions
// ----------------------------------------------------------------------------

// Average rate over total crop area from (share of area fertilized, rate on
// the fertilized share).
inline double harmonize_rate(double pct_fertilized, double rate_on_fertilized) {
    if (!std::isfinite(pct_fertilized) || !std::isfinite(rate_on_fertilized) ||
        pct_fertilized < 0.0 || rate_on_fertilized < 0.0)
        throw std::invalid_argument("harmonize_rate: inputs must be finite and non-negative");
    if (pct_fertilized > 1.0)
        throw std::invalid_argument("harmonize_rate: fraction > 1");
    return pct_fertilized * rate_on_fertilized;
}

inline double rate_from_totals(double total_use_tonnes, double harvested_area_ha) {
    if (!(harvested_area_ha > 0.0)) throw std::invalid_argument("no harvested area");
    return total_use_tonnes * 1000.0 / harvested_area_ha;
}

struct GroupRate {
    double rate = 0.0;
    bool single_crop_shortcut = false; // one member held > 90% of the area
};

// Area-weighted group rate; the dominance shortcut assigns the single rate.
inline GroupRate weighted_group_rate(const std::vector<std::pair<double, double>>& members) {
    if (members.empty()) throw std::invalid_argument("weighted_group_rate: no members");
    double area_sum = 0.0;
    for (const auto& [rate, area] : members) {
        if (area < 0.0) throw std::invalid_argument("weighted_group_rate: negative area");
        area_sum += area;
    }
    if (!(area_sum > 0.0)) throw std::invalid_argument("weighted_group_rate: all areas zero");
    for (const auto& [rate, area] : members)
        if (area > 0.9 * area_sum) return GroupRate{rate, true};
    double num = 0.0;
    for (const auto& [rate, area] : members) num += rate * area;
    return GroupRate{num / area_sum, false};
}

// Standard atomic masses; the conversion multiplies by oxide mass over the
// mass of the contained element atoms.
inline double oxide_conversion(char element, double amount) {
    if (amount < 0.0) throw std::invalid_argument("oxide_conversion: negative amount");
    constexpr double mass_p = 30.973761998;
    constexpr double mass_k = 39.0983;
    constexpr double mass_o = 15.999;
    if (element == 'P') return amount * (2.0 * mass_p + 5.0 * mass_o) / (2.0 * mass_p);
    if (element == 'K') return amount * (2.0 * mass_k + mass_o) / (2.0 * mass_k);
    throw std::invalid_argument(std::string("oxide_conversion: unknown element '") + element +
                                "'");
}

// ----------------------------------------------------------------------------
// Filters
// ----------------------------------------------------------------------------

struct AnomalyFilterResult {
    std::vector<RateRecord> kept;
    std::size_t removed = 0;
};

// Rates above 5000 kg/ha are measurement anomalies; the boundary itself is
// kept ("greater than" cut).
inline AnomalyFilterResult filter_anomalies(const std::vector<RateRecord>& records) {
    AnomalyFilterResult out;
    for (const auto& r : records) {
        if (r.rate > 5000.0)
            out.removed++;
        else
            out.kept.push_back(r);
    }
    return out;
}

// Keep only (country, crop, year) groups with all three nutrients present.
inline std::vector<RateRecord> select_labeled(const std::vector<RateRecord>& records) {
    std::map<std::tuple<std::string, std::string, int>, std::set<std::string>> have;
    for (const auto& r : records)
        have[{r.country, r.crop_class, r.year}].insert(r.nutrient);
    std::vector<RateRecord> out;
    for (const auto& r : records)
        if (have[{r.country, r.crop_class, r.year}].size() == nutrients().size())
            out.push_back(r);
    return out;
}

// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> sorted_vals, double q) {
    const std::size_t n = sorted_vals.size();
    if (n == 0) throw std::invalid_argument("quantile of empty set");
    const double pos = q * double(n - 1);
    const std::size_t lo = std::size_t(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - double(lo);
    return sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac;
}

struct IqrFilterResult {
    std::vector<double> kept;
    std::size_t removed = 0;
    bool applied = false; // false = passed through with a warning (n < 4)
};

// Keep v in [Q1 - 1.5*IQR, Q3 + 1.5*IQR].
inline IqrFilterResult iqr_filter(const std::vector<double>& values) {
    IqrFilterResult out;
    if (values.size() < 4) {
        out.kept = values;
        return out;
    }
    out.applied = true;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile(sorted, 0.25);
    const double q3 = quantile(sorted, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - 1.5 * iqr, hi = q3 + 1.5 * iqr;
    for (double v : values) {
        if (v >= lo && v <= hi)
            out.kept.push_back(v);
        else
            out.removed++;
    }
    return out;
}

inline double deflate_price(double nominal, double cpi_index) {
    if (!(cpi_index > 0.0)) throw std::invalid_argument("deflate_price: cpi must be > 0");
    return nominal / cpi_index;
}

// ----------------------------------------------------------------------------
// One-hot encoding
// ----------------------------------------------------------------------------

struct EncodedTable {
    FeatureMatrix matrix;
    FeatureGrouping grouping;
};

// Expand each categorical column into one binary column per level
// (lexicographic level order); numeric columns pass through. A missing
// categorical value leaves the whole family missing. The grouping maps every
// encoded column back to its original feature name.
inline EncodedTable one_hot_encode(const Table& t, const std::vector<std::string>& cat_cols) {
    std::set<std::string> cats(cat_cols.begin(), cat_cols.end());
    for (const auto& c : cat_cols) (void)t.col(c);

    struct Plan {
        std::string name;
        std::size_t src = 0;
        bool categorical = false;
        std::vector<std::string> levels;
    };
    std::vector<Plan> plans;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        Plan p;
        p.name = t.columns[c];
        p.src = c;
        p.categorical = cats.count(t.columns[c]) > 0;
        if (p.categorical) {
            std::set<std::string> lv;
            for (const auto& row : t.rows)
                if (!row[c].empty()) lv.insert(row[c]);
            p.levels.assign(lv.begin(), lv.end());
        }
        plans.push_back(std::move(p));
    }

    std::size_t n_cols = 0;
    for (const auto& p : plans) n_cols += p.categorical ? p.levels.size() : 1;

    EncodedTable out;
    out.matrix = FeatureMatrix(t.rows.size(), n_cols);
    std::size_t at = 0;
    for (const auto& p : plans) {
        const int group = int(out.grouping.group_names.size());
        out.grouping.group_names.push_back(p.name);
        if (p.categorical) {
            for (std::size_t l = 0; l < p.levels.size(); ++l) {
                out.matrix.col_names[at + l] = p.name + "=" + p.levels[l];
                out.matrix.col_kinds[at + l] = ColKind::OneHotBinary;
                out.grouping.group_of_col.push_back(group);
            }
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                const std::string& cell = t.rows[r][p.src];
                for (std::size_t l = 0; l < p.levels.size(); ++l)
                    out.matrix.set(r, at + l,
                                   cell.empty() ? kMissing : (cell == p.levels[l] ? 1.0 : 0.0));
            }
            at += p.levels.size();
        } else {
            out.matrix.col_names[at] = p.name;
            out.grouping.group_of_col.push_back(group);
            for (std::size_t r = 0; r < t.rows.size(); ++r)
                out.matrix.set(r, at, parse_cell(t.rows[r][p.src]));
            at += 1;
        }
    }
    return out;
}

// ----------------------------------------------------------------------------
// Rate table ingestion
// ----------------------------------------------------------------------------

// Season labels like "1996/97" resolve to the starting year.
inline int parse_year_label(const std::string& s) {
    const auto slash = s.find('/');
    const std::string head = slash == std::string::npos ? s : s.substr(0, slash);
    try {
        std::size_t used = 0;
        const int y = std::stoi(head, &used);
        if (used != head.size()) throw std::invalid_argument(s);
        return y;
    } catch (...) {
        throw std::runtime_error("bad year label: '" + s + "'");
    }
}

// Read rate records from a table with columns country, crop, year, nutrient,
// rate and a mandatory source_date column; duplicate keys resolve to the most
// recent source.
inline std::vector<RateRecord> read_rate_records(const Table& t) {
    const std::size_t c_country = t.col("country");
    const std::size_t c_crop = t.col("crop");
    const std::size_t c_year = t.col("year");
    const std::size_t c_nutrient = t.col("nutrient");
    const std::size_t c_rate = t.col("rate");
    const std::size_t c_src = t.col("source_date");

    std::map<std::tuple<std::string, std::string, int, std::string>,
             std::pair<std::string, RateRecord>>
        latest;
    for (const auto& row : t.rows) {
        RateRecord r;
        r.country = row[c_country];
        r.crop_class = row[c_crop];
        r.year = parse_year_label(row[c_year]);
        r.nutrient = row[c_nutrient];
        r.rate = parse_cell(row[c_rate]);
        r.validate();
        const auto key = std::make_tuple(r.country, r.crop_class, r.year, r.nutrient);
        auto it = latest.find(key);
        if (it == latest.end() || row[c_src] > it->second.first)
            latest[key] = {row[c_src], r};
    }
    std::vector<RateRecord> out;
    out.reserve(latest.size());
    for (const auto& [_, v] : latest) out.push_back(v.second);
    return out;
}

} // namespace fertgrid
