// Generates the bundled desk-scale fixture: a 20x20 grid world with 10
// countries, the 13 crop classes, 5 years of data, and every table the
// pipeline consumes. Fully deterministic given --seed.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fertgrid/fertgrid.hpp"

using namespace fertgrid;
namespace fs = std::filesystem;

namespace {

struct World {
    GridSpec spec;
    int year_from = 2000;
    int year_to = 2004;
    std::vector<std::string> countries;
    std::map<std::string, Raster> fracs;
    CropMapSet2000 maps;
    YearlyCropland yearly;
    ClimateRasters climate;
    std::map<std::string, Raster> cost; // nutrient -> cost-distance proxy
};

std::string country_code(int i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "C%02d", i + 1);
    return buf;
}

World build_world(Rng& rng) {
    World w;
    w.spec.n_rows = 20;
    w.spec.n_cols = 20;
    w.spec.cell_deg = 0.25;
    w.spec.origin_lat = 2.5;
    w.spec.origin_lon = 0.0;

    // 10 rectangular countries: 2 band rows x 5 block columns
    for (int i = 0; i < 10; ++i) {
        w.countries.push_back(country_code(i));
        w.fracs[w.countries.back()] = Raster(w.spec, 0.0, "fraction");
    }
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 20; ++c)
            w.fracs[country_code((r / 10) * 5 + (c / 4))].at(r, c) = 1.0;

    // base-year crop maps; rice mirrors the yearly rice cropland layer
    Raster combined(w.spec, 0.0, "ha");
    for (std::size_t ci = 0; ci < crop_classes().size(); ++ci) {
        const std::string& crop = crop_classes()[ci];
        Raster layer(w.spec, 0.0, "ha");
        for (int r = 0; r < 20; ++r) {
            for (int c = 0; c < 20; ++c) {
                if ((std::size_t(r) * 7 + std::size_t(c) * 3 + ci * 5) % 11 >= 7) continue;
                layer.at(r, c) = 50.0 + 3.0 * double((r * 13 + c * 17 + int(ci) * 29) % 100);
            }
        }
        if (crop != "Rice")
            for (std::size_t i = 0; i < layer.values.size(); ++i)
                combined.values[i] += layer.values[i];
        w.maps.harea_2000[crop] = std::move(layer);
    }
    for (auto& v : combined.values) v *= 1.25;
    w.maps.combined_2000 = combined;

    for (int y = w.year_from; y <= w.year_to; ++y) {
        Raster nr = combined;
        for (auto& v : nr.values) v *= 1.0 + 0.02 * double(y - 2000);
        w.yearly.non_rice[y] = std::move(nr);
        Raster rice = w.maps.harea_2000["Rice"];
        for (auto& v : rice.values) v *= 1.0 - 0.01 * double(y - 2000);
        w.yearly.rice[y] = std::move(rice);
    }
    // the 2000 layers coincide with the base maps by construction
    w.yearly.non_rice[2000] = w.maps.combined_2000;
    w.yearly.rice[2000] = w.maps.harea_2000["Rice"];

    // smooth synthetic climate
    std::vector<Raster> pr, tm, pe;
    for (int m = 0; m < 12; ++m) {
        Raster a(w.spec), b(w.spec), c(w.spec);
        for (int r = 0; r < 20; ++r) {
            for (int col = 0; col < 20; ++col) {
                const double phase = 2.0 * kPi * double(m) / 12.0;
                a.at(r, col) = 60.0 + 30.0 * std::sin(phase) + 2.0 * r + col;
                b.at(r, col) = 18.0 + 8.0 * std::sin(phase + 1.5) + 0.3 * (r - 10);
                c.at(r, col) = 3.0 + 1.5 * std::sin(phase + 3.0) + 0.02 * col;
            }
        }
        pr.push_back(std::move(a));
        tm.push_back(std::move(b));
        pe.push_back(std::move(c));
    }
    w.climate = derive_climate(pr, tm, pe);

    // cost-distance price proxies from per-nutrient source sites
    Raster friction(w.spec, 0.0, "cost/m");
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 20; ++c) friction.at(r, c) = 1.0 + 0.3 * double((r + c) % 5);
    const std::map<std::string, std::vector<Cell>> sources = {
        {"N", {{2, 2}, {15, 16}}}, {"P2O5", {{9, 9}}}, {"K2O", {{18, 3}}}};
    for (const auto& [nut, cells] : sources) w.cost[nut] = cost_distance(friction, cells);

    (void)rng;
    return w;
}

double country_env(const World& w, const Raster& env, const std::string& crop,
                   const std::string& country) {
    auto v = aggregate_environmental(env, w.maps.harea_2000.at(crop), w.fracs.at(country));
    return v ? *v : kMissing;
}

void write_rasters(const World& w, const fs::path& dir) {
    fs::create_directories(dir);
    write_geotiff((dir / "combined2000.tiff").string(), w.maps.combined_2000);
    for (const auto& [crop, layer] : w.maps.harea_2000)
        write_geotiff((dir / ("crop2000_" + crop + ".tiff")).string(), layer);
    for (const auto& [y, layer] : w.yearly.non_rice)
        write_geotiff((dir / ("carea_nr_" + std::to_string(y) + ".tiff")).string(), layer);
    for (const auto& [y, layer] : w.yearly.rice)
        write_geotiff((dir / ("carea_r_" + std::to_string(y) + ".tiff")).string(), layer);
    for (const auto& [country, frac] : w.fracs)
        write_geotiff((dir / ("countryfrac_" + country + ".tiff")).string(), frac);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate the bundled desk-scale pipeline fixture"};
    std::string out_dir;
    std::uint64_t seed = 42;
    app.add_option("--out", out_dir, "fixture output directory")->required();
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        Rng rng(seed);
        World w = build_world(rng);
        const fs::path root = out_dir;
        fs::create_directories(root / "tables");
        write_rasters(w, root / "rasters");

        // ------------------------------------------------------ registry ---
        struct Feat {
            std::string name, category, unit, nutrients;
        };
        std::vector<Feat> feats = {
            {"year", "agrological", "", "all"},
            {"crop_area_ha", "agrological", "ha", "all"},
            {"map_mm", "environmental", "mm/year", "all"},
            {"mat_c", "environmental", "degC", "all"},
            {"aridity", "environmental", "", "all"},
            {"gdp_per_capita", "socioeconomic", "usd", "all"},
            {"education_share", "socioeconomic", "%", "all"},
            {"population_pressure", "socioeconomic", "persons/ha", "all"},
            {"country_n_per_ha", "agrological", "t/ha", "N"},
            {"country_p2o5_per_ha", "agrological", "t/ha", "P2O5"},
            {"country_k2o_per_ha", "agrological", "t/ha", "K2O"},
            {"crop_n_removal", "agrological", "kg/ha", "N"},
            {"crop_p_removal", "agrological", "kg/ha", "P2O5"},
            {"crop_k_removal", "agrological", "kg/ha", "K2O"},
            {"n_cost_production", "socioeconomic", "", "N"},
            {"p_cost_production", "socioeconomic", "", "P2O5"},
            {"k_cost_production", "socioeconomic", "", "K2O"},
            {"global_price", "socioeconomic", "usd/t", "all"},
        };
        {
            Table t;
            t.columns = {"feature", "category", "unit", "nutrients"};
            t.rows.push_back({"country", "agrological", "", "all"});
            t.rows.push_back({"crop", "agrological", "", "all"});
            for (const auto& f : feats) t.rows.push_back({f.name, f.category, f.unit, f.nutrients});
            write_table((root / "tables" / "registry.csv").string(), t);
        }

        // -------------------------------------------- harea_fao + helpers ---
        // national totals follow the built maps with a seeded wobble
        std::map<std::tuple<std::string, std::string, int>, double> harea_fao;
        {
            Table t;
            t.columns = {"country", "crop", "year", "area_ha"};
            for (int y = w.year_from; y <= w.year_to; ++y) {
                for (const auto& crop : crop_classes()) {
                    Raster built = build_harea_year(w.maps, w.yearly, crop, y);
                    for (const auto& country : w.countries) {
                        const Raster& frac = w.fracs.at(country);
                        double s = 0.0;
                        for (std::size_t i = 0; i < built.values.size(); ++i)
                            s += built.values[i] * frac.values[i];
                        const double total = s * rng.uniform_real(0.9, 1.1);
                        harea_fao[{country, crop, y}] = total;
                        t.rows.push_back({country, crop, std::to_string(y),
                                          format_cell(total)});
                    }
                }
            }
            write_table((root / "tables" / "harea_fao.csv").string(), t);
        }

        // ------------------------------------------------------ features ---
        // per-country socio baselines
        std::map<std::string, double> gdp_base, edu_base, pop_base;
        for (const auto& country : w.countries) {
            gdp_base[country] = rng.uniform_real(2000.0, 45000.0);
            edu_base[country] = rng.uniform_real(2.0, 7.0);
            pop_base[country] = rng.uniform_real(0.5, 8.0);
        }
        std::map<std::string, double> removal_base; // per crop x nutrient
        for (const auto& crop : crop_classes())
            for (const auto& nut : nutrients())
                removal_base[crop + nut] = rng.uniform_real(5.0, 40.0);
        std::map<std::pair<std::string, std::string>, double> use_per_ha; // country x nut
        for (const auto& country : w.countries)
            for (const auto& nut : nutrients())
                use_per_ha[{country, nut}] = rng.uniform_real(0.02, 0.30);

        auto global_price = [&](int year) { return 180.0 + 15.0 * double(year - 2000); };

        // the deterministic "truth" the rate labels follow
        auto true_rate = [&](const std::string& country, const std::string& crop, int year,
                             const std::string& nut) {
            const double use = use_per_ha.at({country, nut});
            const double removal = removal_base.at(crop + nut);
            const double gdp = gdp_base.at(country) * (1.0 + 0.03 * (year - 2000));
            double r = 220.0 * use + 1.4 * removal + 9.0 * std::sin(removal * 0.35) +
                       0.0006 * gdp + 0.8 * double(year - 2000);
            return std::max(0.0, r);
        };

        Rng noise = rng.fork(1);
        Rng missing = rng.fork(2);
        {
            Table t;
            t.columns = {"country", "crop", "year"};
            for (const auto& f : feats) t.columns.push_back(f.name);
            for (const auto& country : w.countries) {
                for (const auto& crop : crop_classes()) {
                    for (int y = w.year_from; y <= w.year_to; ++y) {
                        std::vector<std::string> row = {country, crop, std::to_string(y)};
                        auto push = [&](double v, double missing_rate = 0.0) {
                            if (missing_rate > 0.0 && missing.uniform_real() < missing_rate)
                                row.push_back("");
                            else
                                row.push_back(format_cell(v));
                        };
                        push(double(y));
                        push(harea_fao.at({country, crop, y}));
                        push(country_env(w, w.climate.map, crop, country) +
                                 6.0 * double(y - 2000), 0.05);
                        push(country_env(w, w.climate.mat, crop, country) +
                                 0.1 * double(y - 2000), 0.05);
                        push(country_env(w, w.climate.aridity, crop, country), 0.15);
                        push(gdp_base.at(country) * (1.0 + 0.03 * (y - 2000)), 0.15);
                        push(edu_base.at(country) + 0.05 * (y - 2000), 0.15);
                        push(pop_base.at(country) * (1.0 + 0.01 * (y - 2000)), 0.1);
                        for (const auto& nut : nutrients())
                            push(use_per_ha.at({country, nut}) * (1.0 + 0.02 * (y - 2000)));
                        for (const auto& nut : nutrients())
                            push(removal_base.at(crop + nut));
                        for (const auto& nut : nutrients())
                            push(country_env(w, w.cost.at(nut), crop, country), 0.05);
                        push(global_price(y));
                        t.rows.push_back(std::move(row));
                    }
                }
            }
            write_table((root / "tables" / "features.csv").string(), t);
        }

        // --------------------------------------------------------- rates ---
        {
            Table t;
            t.columns = {"country", "crop", "year", "nutrient", "rate", "source_date"};
            for (const auto& country : w.countries)
                for (const auto& crop : crop_classes())
                    for (int y = w.year_from; y <= w.year_to; ++y)
                        for (const auto& nut : nutrients()) {
                            const double r = std::max(
                                0.0, true_rate(country, crop, y, nut) + 0.5 * noise.normal());
                            t.rows.push_back({country, crop, std::to_string(y), nut,
                                              format_cell(r), "2022-01"});
                        }
            // a stale duplicate that most-recent resolution must discard
            t.rows.push_back({w.countries[0], "Wheat", std::to_string(w.year_from), "N",
                              "4999", "1990-01"});
            write_table((root / "tables" / "rates.csv").string(), t);
        }

        // ------------------------------------------- grassland side inputs ---
        {
            Table t;
            t.columns = {"country", "year", "a_f", "a_a"};
            for (const auto& country : w.countries) {
                const double aa = 2.0e6 + 1.0e5 * double(&country - &w.countries[0]);
                for (int y = w.year_from; y <= w.year_to; ++y) {
                    const double af =
                        aa * (country == "C07" ? 0.9
                                               : 0.2 + 0.05 * double((y - w.year_from) % 4));
                    t.rows.push_back({country, std::to_string(y), format_cell(af),
                                      format_cell(aa)});
                }
            }
            write_table((root / "tables" / "areas.csv").string(), t);
        }
        {
            // observations for the mean_r / interp_r countries
            Table t;
            t.columns = {"country", "nutrient", "year", "q_f", "q_a", "a_f", "a_a"};
            for (const std::string country : {"C02", "C03"}) {
                for (const auto& nut : nutrients()) {
                    for (int y : {2000, 2002, 2004}) {
                        const double aa = 2.0e6;
                        const double af = aa * 0.25;
                        const double r = 0.3 + 0.1 * double((y - 2000) / 2);
                        const double qa = 150.0 + 20.0 * double(y - 2000);
                        const double qf = r * af / aa * qa;
                        t.rows.push_back({country, nut, std::to_string(y), format_cell(qf),
                                          format_cell(qa), format_cell(af), format_cell(aa)});
                    }
                }
            }
            write_table((root / "tables" / "observations.csv").string(), t);
        }
        {
            std::ofstream rules(root / "rules.txt");
            rules << "# toy world share rules, one document per country\n";
            const std::map<std::string, std::string> body = {
                {"C01", "fixed 0"},
                {"C02", "mean_r"},
                {"C03", "interp_r anchor=2000:0"},
                {"C04", "fixed 0.25"},
                {"C05", "blend(fixed 0.1; fixed 0.3)"},
                {"C07", "midpoint_cap"},
                {"C08", "fixed 0.05"},
                {"C09", "mean_r 0.5"},
                {"C10", "fixed 0.4"}};
            bool first = true;
            for (const auto& country : w.countries) {
                if (!first) rules << "---\n";
                first = false;
                rules << "country: " << country << "\n";
                if (country == "C06") {
                    rules << "note: method switch mid-period\n";
                    rules << "rule N 2000-2001: fixed 0.1\n";
                    rules << "rule N 2002-2004: mean_r 0.4\n";
                    rules << "rule P2O5 2000-2004: fixed 0.1\n";
                    rules << "rule K2O 2000-2004: fixed 0.1\n";
                    continue;
                }
                const std::string& expr = body.at(country);
                for (const auto& nut : nutrients())
                    rules << "rule " << nut << " 2000-2004: " << expr << "\n";
            }
        }

        // ------------------------------------------------------- budgets ---
        {
            Table t;
            t.columns = {"country", "nutrient", "year", "total_use_t"};
            Rng wobble = rng.fork(3);
            for (const auto& country : w.countries) {
                for (const auto& nut : nutrients()) {
                    for (int y = w.year_from; y <= w.year_to; ++y) {
                        double kg = 0.0;
                        for (const auto& crop : crop_classes())
                            kg += true_rate(country, crop, y, nut) *
                                  harea_fao.at({country, crop, y});
                        const double total =
                            kg / 1000.0 * wobble.uniform_real(0.92, 1.08);
                        t.rows.push_back({country, nut, std::to_string(y), format_cell(total)});
                    }
                }
            }
            write_table((root / "tables" / "budgets.csv").string(), t);
        }

        // ---------------------------------------------------------- refs ---
        {
            Table t;
            t.columns = {"country", "crop", "year", "nutrient", "rate"};
            Rng ref_noise = rng.fork(4);
            const std::vector<std::pair<std::string, std::string>> picks = {
                {"C01", "Wheat"}, {"C02", "Maize"}, {"C04", "Rice"}, {"C09", "FiberCrops"}};
            for (const auto& [country, crop] : picks)
                for (const auto& nut : nutrients())
                    for (int y = w.year_from; y <= w.year_to; ++y) {
                        const double r = true_rate(country, crop, y, nut) *
                                         ref_noise.uniform_real(0.85, 1.15);
                        t.rows.push_back({country, crop, std::to_string(y), nut,
                                          format_cell(r)});
                    }
            // one country reports only the NPK sum
            for (int y = w.year_from; y <= w.year_to; ++y) {
                double sum = 0.0;
                for (const auto& nut : nutrients()) sum += true_rate("C05", "Soybean", y, nut);
                t.rows.push_back({"C05", "Soybean", std::to_string(y), "NPK",
                                  format_cell(sum * ref_noise.uniform_real(0.9, 1.1))});
            }
            write_table((root / "tables" / "refs.csv").string(), t);
        }

        // -------------------------------------------------------- config ---
        {
            std::ofstream cfg(root / "config.json");
            cfg << "{\n"
                << "  \"seed\": " << seed << ",\n"
                << "  \"years\": [" << w.year_from << ", " << w.year_to << "],\n"
                << "  \"paths\": {\n"
                << "    \"features\": \"tables/features.csv\",\n"
                << "    \"rates\": \"tables/rates.csv\",\n"
                << "    \"registry\": \"tables/registry.csv\",\n"
                << "    \"budgets\": \"tables/budgets.csv\",\n"
                << "    \"grass_areas\": \"tables/areas.csv\",\n"
                << "    \"grass_observations\": \"tables/observations.csv\",\n"
                << "    \"share_rules\": \"rules.txt\",\n"
                << "    \"harea_fao\": \"tables/harea_fao.csv\",\n"
                << "    \"refs\": \"tables/refs.csv\",\n"
                << "    \"rasters\": \"rasters\",\n"
                << "    \"out\": \"out\"\n"
                << "  },\n"
                << "  \"model\": {\"max_depth\": 4, \"n_trees\": 60, \"learning_rate\": 0.3, "
                   "\"min_samples_leaf\": 5},\n"
                << "  \"search_grid\": {\"max_depth\": [3, 5]},\n"
                << "  \"k_outer\": 2,\n"
                << "  \"k_inner\": 5\n"
                << "}\n";
        }
        std::cout << "fixture written to " << root.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "fixture generation failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
