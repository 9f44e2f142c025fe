#pragma once
// Stage orchestration behind the CLI: configuration, the eight subcommands,
// structured logs, artifact tracking, and the reproducibility manifest.
#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fertgrid/csv.hpp"
#include "fertgrid/downscale.hpp"
#include "fertgrid/ensemble_io.hpp"
#include "fertgrid/features.hpp"
#include "fertgrid/geo.hpp"
#include "fertgrid/geotiff.hpp"
#include "fertgrid/grassland.hpp"
#include "fertgrid/manifest.hpp"
#include "fertgrid/metrics.hpp"
#include "fertgrid/model_select.hpp"
#include "fertgrid/reconcile.hpp"
#include "fertgrid/shap.hpp"
#include "fertgrid/validate.hpp"

namespace fertgrid {

struct PipelineConfig {
    std::uint64_t seed = 0;
    int year_from = 0;
    int year_to = 0;
    std::map<std::string, std::string> paths;
    std::string out_dir;
    GbdtConfig model;
    SearchGrid search;
    std::size_t k_outer = 2;
    std::size_t k_inner = 5;
    std::size_t shap_top_k = 10;

    const std::string& path(const std::string& key) const {
        auto it = paths.find(key);
        if (it == paths.end()) throw ConfigError("config: missing path '" + key + "'");
        return it->second;
    }

    static PipelineConfig load(const std::string& config_path) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config: " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ConfigError("config parse error: " + std::string(e.what()));
        }
        PipelineConfig cfg;
        if (!j.contains("seed") || !j["seed"].is_number_unsigned())
            throw ConfigError("config: 'seed' is mandatory");
        cfg.seed = j["seed"].get<std::uint64_t>();
        if (!j.contains("years") || j["years"].size() != 2)
            throw ConfigError("config: 'years' must be [from, to]");
        cfg.year_from = j["years"][0].get<int>();
        cfg.year_to = j["years"][1].get<int>();
        if (cfg.year_to < cfg.year_from) throw ConfigError("config: years reversed");

        const auto base = std::filesystem::path(config_path).parent_path();
        if (!j.contains("paths") || !j["paths"].is_object())
            throw ConfigError("config: 'paths' object required");
        for (const auto& [k, v] : j["paths"].items()) {
            std::filesystem::path p = v.get<std::string>();
            cfg.paths[k] = (p.is_absolute() ? p : base / p).string();
        }
        if (!cfg.paths.count("out")) throw ConfigError("config: paths.out required");
        cfg.out_dir = cfg.paths["out"];

        if (j.contains("model"))
            for (const auto& [k, v] : j["model"].items())
                apply_param(cfg.model, k, v.get<double>());
        cfg.model.seed = cfg.seed;
        if (j.contains("search_grid"))
            for (const auto& [k, v] : j["search_grid"].items()) {
                std::vector<double> vals;
                for (const auto& x : v) vals.push_back(x.get<double>());
                cfg.search.params.push_back({k, vals});
            }
        if (j.contains("k_outer")) cfg.k_outer = j["k_outer"].get<std::size_t>();
        if (j.contains("k_inner")) cfg.k_inner = j["k_inner"].get<std::size_t>();
        if (j.contains("shap_top_k")) cfg.shap_top_k = j["shap_top_k"].get<std::size_t>();
        try {
            cfg.model.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: bad model parameters: ") + e.what());
        }
        return cfg;
    }
};

inline std::size_t worker_count() {
    if (const char* env = std::getenv("FERTGRID_WORKERS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1 && n <= 64) return std::size_t(n);
    }
    return 1;
}

// Runs tasks [0, n) on the worker pool; tasks must be independent and write
// only their own slots.
template <typename Fn>
inline void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) return;
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Stage context: resolves paths, tracks written artifacts (for failure
// cleanup and the manifest), and emits structured log lines.
class StageContext {
public:
    explicit StageContext(const PipelineConfig& cfg, std::ostream& log = std::cout)
        : cfg_(cfg), log_(log) {
        std::filesystem::create_directories(cfg.out_dir);
    }

    const PipelineConfig& cfg() const { return cfg_; }

    std::string out_path(const std::string& rel) {
        const auto p = std::filesystem::path(cfg_.out_dir) / rel;
        std::filesystem::create_directories(p.parent_path());
        written_.push_back(p.string());
        return p.string();
    }

    // input artifact produced by an earlier stage
    std::string stage_input(const std::string& rel, const std::string& producer) const {
        const auto p = std::filesystem::path(cfg_.out_dir) / rel;
        if (!std::filesystem::exists(p))
            throw std::runtime_error("missing artifact '" + rel + "' (run `" + producer +
                                     "` first)");
        return p.string();
    }

    std::string input_file(const std::string& key) const {
        const std::string& p = cfg_.path(key);
        if (!std::filesystem::exists(p))
            throw ConfigError("config path '" + key + "' does not exist: " + p);
        return p;
    }

    void log(const std::string& stage, const std::string& key, const std::string& metric,
             const std::string& value) {
        log_ << "[" << stage << "] " << key << " " << metric << "=" << value << "\n";
    }
    void log(const std::string& stage, const std::string& key, const std::string& metric,
             double value) {
        log_ << "[" << stage << "] " << key << " " << metric << "=" << format_cell(value)
             << "\n";
    }

    void remove_written() {
        for (const auto& p : written_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        written_.clear();
    }

    const std::vector<std::string>& written() const { return written_; }

private:
    const PipelineConfig& cfg_;
    std::ostream& log_;
    std::vector<std::string> written_;
};

namespace stages {

// ---------------------------------------------------------------- ingest ---

struct RegistryRow {
    FeatureCategory category;
    std::string unit;
    std::set<std::string> nutrients; // empty = all
};

inline std::map<std::string, RegistryRow> read_registry(const std::string& path) {
    auto t = read_table(path);
    std::map<std::string, RegistryRow> out;
    for (const auto& row : t.rows) {
        RegistryRow r;
        const std::string cat = row[t.col("category")];
        if (cat == "environmental") r.category = FeatureCategory::Environmental;
        else if (cat == "agrological") r.category = FeatureCategory::Agrological;
        else if (cat == "socioeconomic") r.category = FeatureCategory::Socioeconomic;
        else throw std::runtime_error("registry: unknown category '" + cat + "'");
        r.unit = row[t.col("unit")];
        const std::string nuts = row[t.col("nutrients")];
        if (nuts != "all" && !nuts.empty()) {
            for (const auto& n : split_line(nuts, '|'))
                if (!n.empty()) r.nutrients.insert(n);
        }
        out[row[t.col("feature")]] = r;
    }
    return out;
}

inline void stage_ingest(StageContext& ctx) {
    const auto rate_table = read_table(ctx.input_file("rates"));
    auto records = read_rate_records(rate_table);
    const auto anomalies = filter_anomalies(records);
    ctx.log("ingest", "rates", "anomalies_removed", double(anomalies.removed));
    auto labeled = select_labeled(anomalies.kept);
    ctx.log("ingest", "rates", "labeled_records", double(labeled.size()));
    if (labeled.empty()) throw std::runtime_error("ingest: no fully labeled rows survive");

    std::map<std::tuple<std::string, std::string, int>, std::map<std::string, double>> rates;
    for (const auto& r : labeled) rates[{r.country, r.crop_class, r.year}][r.nutrient] = r.rate;

    const auto features = read_table(ctx.input_file("features"));
    const auto registry = read_registry(ctx.input_file("registry"));
    const std::size_t c_country = features.col("country");
    const std::size_t c_crop = features.col("crop");
    const std::size_t c_year = features.col("year");
    for (const auto& col : features.columns)
        if (col != "country" && col != "crop" && col != "year" && !registry.count(col))
            throw std::runtime_error("ingest: unregistered feature column '" + col + "'");

    for (const auto& nutrient : nutrients()) {
        // restrict to columns applicable to this nutrient
        Table slice;
        std::vector<std::size_t> keep_cols;
        for (std::size_t c = 0; c < features.columns.size(); ++c) {
            const std::string& name = features.columns[c];
            if (name == "country" || name == "crop" || name == "year") {
                keep_cols.push_back(c);
                slice.columns.push_back(name);
                continue;
            }
            const auto& reg = registry.at(name);
            if (reg.nutrients.empty() || reg.nutrients.count(nutrient)) {
                keep_cols.push_back(c);
                slice.columns.push_back(name);
            }
        }
        std::vector<std::array<std::string, 3>> keys;
        std::vector<double> targets;
        for (const auto& row : features.rows) {
            const auto key = std::make_tuple(row[c_country], row[c_crop],
                                             parse_year_label(row[c_year]));
            auto it = rates.find(key);
            if (it == rates.end()) continue;
            std::vector<std::string> out_row;
            for (std::size_t c : keep_cols) out_row.push_back(row[c]);
            slice.rows.push_back(std::move(out_row));
            keys.push_back({row[c_country], row[c_crop], row[c_year]});
            targets.push_back(it->second.at(nutrient));
        }
        if (slice.rows.empty())
            throw std::runtime_error("ingest: no feature rows join the labeled rates");

        auto enc = one_hot_encode(slice, {"country", "crop"});

        Table dataset;
        dataset.columns = {"key_country", "key_crop", "key_year"};
        for (const auto& n : enc.matrix.col_names) dataset.columns.push_back(n);
        dataset.columns.push_back("target");
        for (std::size_t r = 0; r < enc.matrix.n_rows; ++r) {
            std::vector<std::string> row = {keys[r][0], keys[r][1], keys[r][2]};
            for (std::size_t c = 0; c < enc.matrix.n_cols; ++c)
                row.push_back(format_cell(enc.matrix.at(r, c)));
            row.push_back(format_cell(targets[r]));
            dataset.rows.push_back(std::move(row));
        }
        write_table(ctx.out_path("dataset_" + nutrient + ".csv"), dataset);

        Table grouping;
        grouping.columns = {"column", "group", "category"};
        for (std::size_t c = 0; c < enc.matrix.n_cols; ++c) {
            const std::string& group =
                enc.grouping.group_names[std::size_t(enc.grouping.group_of_col[c])];
            std::string category = "agrological";
            auto rit = registry.find(group);
            if (rit != registry.end()) category = to_string(rit->second.category);
            grouping.rows.push_back({enc.matrix.col_names[c], group, category});
        }
        write_table(ctx.out_path("grouping_" + nutrient + ".csv"), grouping);
        ctx.log("ingest", nutrient, "rows", double(enc.matrix.n_rows));
        ctx.log("ingest", nutrient, "encoded_columns", double(enc.matrix.n_cols));
    }
}

// ----------------------------------------------------------------- train ---

struct Dataset {
    FeatureMatrix matrix;
    std::vector<double> targets;
    std::vector<std::array<std::string, 3>> keys; // country, crop, year
};

inline Dataset load_dataset(const std::string& path) {
    auto t = read_table(path);
    Dataset d;
    const std::size_t kc = t.col("key_country"), kr = t.col("key_crop"), ky = t.col("key_year");
    const std::size_t tgt = t.col("target");
    Table feat;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (c != kc && c != kr && c != ky && c != tgt) feat.columns.push_back(t.columns[c]);
    for (const auto& row : t.rows) {
        d.keys.push_back({row[kc], row[kr], row[ky]});
        d.targets.push_back(parse_cell(row[tgt]));
        std::vector<std::string> fr;
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            if (c != kc && c != kr && c != ky && c != tgt) fr.push_back(row[c]);
        feat.rows.push_back(std::move(fr));
    }
    d.matrix = matrix_from_table(feat);
    return d;
}

inline void stage_train(StageContext& ctx) {
    const auto& cfg = ctx.cfg();
    std::vector<MetricsTableRow> table_rows;
    Table pred;
    pred.columns = {"country", "crop", "year", "nutrient", "rate_pred"};

    for (const auto& nutrient : nutrients()) {
        auto d = load_dataset(ctx.stage_input("dataset_" + nutrient + ".csv", "ingest"));
        auto res = nested_cv(d.matrix, d.targets, cfg.search, cfg.k_outer, cfg.k_inner,
                             cfg.model, cfg.seed);
        table_rows.push_back({nutrient, "HGB", res.report});
        ctx.log("train", nutrient, "r2_mean", res.report.r2.mean);
        ctx.log("train", nutrient, "mae_mean", res.report.mae.mean);

        // naive baseline on the same outer folds
        std::vector<FoldMetrics> naive_folds;
        for (const auto& test_idx : res.outer_folds) {
            std::vector<double> train_y, test_y;
            std::vector<bool> in_test(d.targets.size(), false);
            for (std::size_t i : test_idx) in_test[i] = true;
            for (std::size_t i = 0; i < d.targets.size(); ++i)
                (in_test[i] ? test_y : train_y).push_back(d.targets[i]);
            const double mean = naive_baseline(train_y);
            std::vector<double> p(test_y.size(), mean);
            naive_folds.push_back(metrics(test_y, p));
        }
        auto naive_rep = MetricReport::from_folds(std::move(naive_folds));
        table_rows.push_back({nutrient, "naive", naive_rep});
        ctx.log("train", nutrient, "naive_r2_mean", naive_rep.r2.mean);

        // production model: refit on all rows with the majority-vote config
        const GbdtConfig final_cfg = majority_config(res.fold_configs);
        auto ens = fit(d.matrix, d.targets, final_cfg);
        save_ensemble(ctx.out_path("model_" + nutrient + ".txt"), ens);

        auto preds = predict(ens, d.matrix);
        for (std::size_t r = 0; r < preds.size(); ++r)
            pred.rows.push_back({d.keys[r][0], d.keys[r][1], d.keys[r][2], nutrient,
                                 format_cell(std::max(0.0, preds[r]))});
    }

    std::ofstream mt(ctx.out_path("metrics.tsv"));
    mt << metrics_table(table_rows);
    write_table(ctx.out_path("pred_raw.csv"), pred);
}

// --------------------------------------------------------------- explain ---

inline void stage_explain(StageContext& ctx) {
    for (const auto& nutrient : nutrients()) {
        auto d = load_dataset(ctx.stage_input("dataset_" + nutrient + ".csv", "ingest"));
        auto ens = load_ensemble(ctx.stage_input("model_" + nutrient + ".txt", "train"));
        auto gt = read_table(ctx.stage_input("grouping_" + nutrient + ".csv", "ingest"));

        FeatureGrouping grouping;
        std::map<std::string, int> group_ids;
        std::map<std::string, std::string> group_category;
        for (const auto& row : gt.rows) {
            const std::string& group = row[gt.col("group")];
            if (!group_ids.count(group)) {
                group_ids[group] = int(grouping.group_names.size());
                grouping.group_names.push_back(group);
                group_category[group] = row[gt.col("category")];
            }
        }
        for (const auto& name : d.matrix.col_names) {
            bool found = false;
            for (const auto& row : gt.rows)
                if (row[gt.col("column")] == name) {
                    grouping.group_of_col.push_back(group_ids[row[gt.col("group")]]);
                    found = true;
                    break;
                }
            if (!found) throw std::runtime_error("explain: column not in grouping: " + name);
        }

        // SHAP on all labeled rows (recorded in the report header)
        std::vector<std::vector<double>> grouped(d.matrix.n_rows);
        std::vector<double> bases(d.matrix.n_rows, 0.0);
        parallel_for(d.matrix.n_rows, [&](std::size_t r) {
            auto sv = tree_shap(ens, std::span<const double>(d.matrix.row(r), d.matrix.n_cols));
            auto g = aggregate_groups(sv, grouping);
            grouped[r] = std::move(g.phi);
            bases[r] = g.base_value;
        });

        Table shap_t;
        shap_t.columns = {"country", "crop", "year", "base"};
        for (const auto& g : grouping.group_names) shap_t.columns.push_back("phi:" + g);
        for (std::size_t r = 0; r < grouped.size(); ++r) {
            std::vector<std::string> row = {d.keys[r][0], d.keys[r][1], d.keys[r][2],
                                            format_cell(bases[r])};
            for (double v : grouped[r]) row.push_back(format_cell(v));
            shap_t.rows.push_back(std::move(row));
        }
        write_table(ctx.out_path("shap_" + nutrient + ".csv"), shap_t);

        auto ranking = importance_ranking(grouped, grouping.group_names, ctx.cfg().shap_top_k);
        Table rank_t;
        rank_t.columns = {"rank", "group", "mean_abs_shap", "category"};
        rank_t.rows.push_back({"#", "rows=all-labeled", "", ""}); // choice of explained rows
        for (std::size_t i = 0; i < ranking.size(); ++i)
            rank_t.rows.push_back({std::to_string(i + 1), ranking[i].group,
                                   format_cell(ranking[i].mean_abs_phi),
                                   group_category[ranking[i].group]});
        write_table(ctx.out_path("importance_" + nutrient + ".csv"), rank_t);
        ctx.log("explain", nutrient, "rows", double(grouped.size()));
        if (!ranking.empty()) ctx.log("explain", nutrient, "top_feature", ranking[0].group);
    }
}

// ---------------------------------------------------------------- shares ---

inline std::map<std::string, AreaSeries> read_area_series(const std::string& path) {
    auto t = read_table(path);
    std::map<std::string, std::map<int, std::pair<double, double>>> tmp;
    for (const auto& row : t.rows)
        tmp[row[t.col("country")]][int(parse_cell(row[t.col("year")]))] = {
            parse_cell(row[t.col("a_f")]), parse_cell(row[t.col("a_a")])};
    std::map<std::string, AreaSeries> out;
    for (auto& [country, by_year] : tmp) {
        AreaSeries s;
        s.start_year = by_year.begin()->first;
        int expect = s.start_year;
        for (const auto& [year, af_aa] : by_year) {
            if (year != expect)
                throw std::runtime_error("area series for " + country + " not contiguous at " +
                                         std::to_string(year));
            s.a_f.push_back(af_aa.first);
            s.a_a.push_back(af_aa.second);
            expect++;
        }
        out[country] = s;
    }
    return out;
}

inline std::vector<ShareObservation> read_observations(const std::string& path) {
    auto t = read_table(path);
    std::vector<ShareObservation> out;
    for (const auto& row : t.rows) {
        ShareObservation o;
        o.country = row[t.col("country")];
        o.nutrient = row[t.col("nutrient")];
        o.year = int(parse_cell(row[t.col("year")]));
        o.q_f = parse_cell(row[t.col("q_f")]);
        o.q_a = parse_cell(row[t.col("q_a")]);
        o.a_f = parse_cell(row[t.col("a_f")]);
        o.a_a = parse_cell(row[t.col("a_a")]);
        o.validate();
        out.push_back(o);
    }
    return out;
}

inline void stage_shares(StageContext& ctx) {
    const auto rules = parse_rules_file(ctx.input_file("share_rules"));
    const auto areas = read_area_series(ctx.input_file("grass_areas"));
    std::vector<ShareObservation> observations;
    if (ctx.cfg().paths.count("grass_observations"))
        observations = read_observations(ctx.input_file("grass_observations"));

    std::vector<ShareSeries> all;
    std::size_t clamped = 0;
    for (const auto& rule : rules) {
        auto ait = areas.find(rule.country);
        if (ait == areas.end())
            throw std::runtime_error("shares: no area series for " + rule.country);
        for (const auto& nutrient : nutrients()) {
            RuleContext rc;
            rc.areas = ait->second;
            for (const auto& o : observations)
                if (o.country == rule.country && o.nutrient == nutrient)
                    rc.observations.push_back(o);
            auto series = apply_country_rule(rule, nutrient, ctx.cfg().year_from,
                                             ctx.cfg().year_to, rc);
            clamped += series.clamp_count();
            all.push_back(std::move(series));
        }
    }
    write_table(ctx.out_path("shares.csv"), share_table(all));
    ctx.log("shares", "all", "series", double(all.size()));
    ctx.log("shares", "all", "clamped_years", double(clamped));
}

// ---------------------------------------------------------------- adjust ---

inline std::map<std::tuple<std::string, std::string, int>, double> read_harea_fao(
    const std::string& path) {
    auto t = read_table(path);
    std::map<std::tuple<std::string, std::string, int>, double> out;
    for (const auto& row : t.rows)
        out[{row[t.col("country")], row[t.col("crop")],
             int(parse_cell(row[t.col("year")]))}] = parse_cell(row[t.col("area_ha")]);
    return out;
}

inline void stage_adjust(StageContext& ctx) {
    auto pred_t = read_table(ctx.stage_input("pred_raw.csv", "train"));
    auto shares_t = read_table(ctx.stage_input("shares.csv", "shares"));
    auto budgets_t = read_table(ctx.input_file("budgets"));
    auto areas = read_harea_fao(ctx.input_file("harea_fao"));

    std::map<std::tuple<std::string, std::string, int>, double> share;
    for (const auto& row : shares_t.rows)
        share[{row[shares_t.col("country")], row[shares_t.col("nutrient")],
               int(parse_cell(row[shares_t.col("year")]))}] =
            parse_cell(row[shares_t.col("share")]);

    std::map<std::tuple<std::string, std::string, int>, double> totals;
    for (const auto& row : budgets_t.rows)
        totals[{row[budgets_t.col("country")], row[budgets_t.col("nutrient")],
                int(parse_cell(row[budgets_t.col("year")]))}] =
            parse_cell(row[budgets_t.col("total_use_t")]);

    // predictions grouped per (country, nutrient, year)
    struct CropRate {
        std::string crop;
        double rate;
        double area;
    };
    std::map<std::tuple<std::string, std::string, int>, std::vector<CropRate>> groups;
    for (const auto& row : pred_t.rows) {
        const std::string country = row[pred_t.col("country")];
        const std::string crop = row[pred_t.col("crop")];
        const int year = int(parse_cell(row[pred_t.col("year")]));
        const std::string nutrient = row[pred_t.col("nutrient")];
        auto ait = areas.find({country, crop, year});
        const double area = ait == areas.end() ? 0.0 : ait->second;
        groups[{country, nutrient, year}].push_back(
            {crop, parse_cell(row[pred_t.col("rate_pred")]), area});
    }

    Table out;
    out.columns = {"country", "crop",     "year",         "nutrient",
                   "rate_raw", "rate_adjusted", "scale"};
    for (auto& [key, crops] : groups) {
        const auto& [country, nutrient, year] = key;
        auto tit = totals.find(key);
        if (tit == totals.end())
            throw std::runtime_error("adjust: no budget for " + country + " " + nutrient +
                                     " " + std::to_string(year));
        auto sit = share.find(key);
        if (sit == share.end())
            throw std::runtime_error("adjust: no grassland share for " + country + " " +
                                     nutrient + " " + std::to_string(year));
        const auto budget = make_budget(country, nutrient, year, tit->second, sit->second);
        std::vector<double> rates, crop_areas;
        for (const auto& c : crops) {
            rates.push_back(c.rate);
            crop_areas.push_back(c.area);
        }
        auto adj = adjust_predictions(rates, crop_areas, budget);
        for (std::size_t i = 0; i < crops.size(); ++i)
            out.rows.push_back({country, crops[i].crop, std::to_string(year), nutrient,
                                format_cell(crops[i].rate), format_cell(adj.rates[i]),
                                format_cell(adj.scale)});
    }
    write_table(ctx.out_path("rates_adjusted.csv"), out);
    ctx.log("adjust", "all", "groups", double(groups.size()));
}

// ------------------------------------------------------------- downscale ---

struct RasterInputs {
    CropMapSet2000 maps;
    YearlyCropland yearly;
    std::vector<std::pair<std::string, Raster>> country_fracs;
};

inline RasterInputs load_raster_inputs(StageContext& ctx, const std::set<int>& years) {
    namespace fs = std::filesystem;
    const fs::path dir = ctx.input_file("rasters");
    RasterInputs in;
    in.maps.combined_2000 = read_geotiff((dir / "combined2000.tiff").string());
    for (const auto& crop : crop_classes()) {
        const fs::path p = dir / ("crop2000_" + crop + ".tiff");
        if (!fs::exists(p))
            throw std::runtime_error("missing base-year crop map: " + p.string());
        in.maps.harea_2000[crop] = read_geotiff(p.string());
    }
    for (int y : years) {
        in.yearly.non_rice[y] = read_geotiff((dir / ("carea_nr_" + std::to_string(y) + ".tiff")).string());
        in.yearly.rice[y] = read_geotiff((dir / ("carea_r_" + std::to_string(y) + ".tiff")).string());
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("countryfrac_", 0) == 0) {
            const std::string country = name.substr(12, name.size() - 12 - 5);
            in.country_fracs.push_back({country, read_geotiff(entry.path().string())});
        }
    }
    std::sort(in.country_fracs.begin(), in.country_fracs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (in.country_fracs.empty())
        throw std::runtime_error("no countryfrac_*.tiff rasters found in " + dir.string());
    return in;
}

inline void stage_downscale(StageContext& ctx) {
    auto adj_t = read_table(ctx.stage_input("rates_adjusted.csv", "adjust"));
    auto areas = read_harea_fao(ctx.input_file("harea_fao"));

    std::set<int> years;
    for (int y = ctx.cfg().year_from; y <= ctx.cfg().year_to; ++y) years.insert(y);
    auto in = load_raster_inputs(ctx, years);
    in.maps.validate();
    const Raster capacity = feasible_area(in.maps.combined_2000.spec);

    // adjusted rate lookup
    std::map<std::tuple<std::string, std::string, int, std::string>, double> rate;
    for (const auto& row : adj_t.rows)
        rate[{row[adj_t.col("country")], row[adj_t.col("crop")],
              int(parse_cell(row[adj_t.col("year")])), row[adj_t.col("nutrient")]}] =
            parse_cell(row[adj_t.col("rate_adjusted")]);

    std::vector<ManifestEntry> manifest;
    std::vector<int> year_list(years.begin(), years.end());

    struct YearOutput {
        std::vector<std::pair<std::string, Raster>> rasters; // filename, data
    };
    std::vector<YearOutput> outputs(year_list.size());

    parallel_for(year_list.size(), [&](std::size_t yi) {
        const int year = year_list[yi];
        const std::vector<std::string>& crops = crop_classes();

        std::vector<Raster> built;
        built.reserve(crops.size());
        for (const auto& crop : crops)
            built.push_back(build_harea_year(in.maps, in.yearly, crop, year));

        // per country: aligned portions across crops, jointly capped
        std::map<std::string, std::vector<Raster>> portions;
        for (const auto& [country, frac] : in.country_fracs) {
            std::vector<Raster> layers;
            layers.reserve(crops.size());
            for (std::size_t c = 0; c < crops.size(); ++c) {
                auto ait = areas.find({country, crops[c], year});
                const double total = ait == areas.end() ? 0.0 : ait->second;
                layers.push_back(align_to_national(built[c], frac, total, capacity));
            }
            enforce_joint_feasibility(layers, capacity);
            portions[country] = std::move(layers);
        }

        std::map<std::string, Raster> harea_total; // crop -> aligned cell totals

        for (std::size_t c = 0; c < crops.size(); ++c) {
            Raster total(in.maps.combined_2000.spec, 0.0, "ha");
            for (const auto& [country, layers] : portions)
                for (std::size_t i = 0; i < total.values.size(); ++i)
                    total.values[i] += layers[c].values[i];
            harea_total[crops[c]] = std::move(total);
        }

        for (const auto& crop : crops) {
            for (const auto& nutrient : nutrients()) {
                std::vector<CountryRateLayer> layers;
                for (const auto& [country, frac] : in.country_fracs) {
                    auto rit = rate.find({country, crop, year, nutrient});
                    if (rit == rate.end())
                        throw std::runtime_error("downscale: no adjusted rate for " + country +
                                                 " " + crop + " " + std::to_string(year) + " " +
                                                 nutrient);
                    layers.push_back({&frac, rit->second});
                }
                Raster fert = fertilizer_raster(harea_total[crop], layers);
                outputs[yi].rasters.push_back({raster_filename(crop, nutrient, year),
                                               std::move(fert)});
            }
        }
    });

    std::size_t n_rasters = 0;
    for (std::size_t yi = 0; yi < outputs.size(); ++yi) {
        for (auto& [name, raster] : outputs[yi].rasters) {
            const std::string path = ctx.out_path("rasters/" + name);
            write_geotiff(path, raster);
            manifest.push_back({"rasters/" + name,
                                std::uint64_t(std::filesystem::file_size(path)),
                                fnv1a64_file(path)});
            n_rasters++;
        }
    }
    write_manifest(ctx.out_path("raster_manifest.txt"), manifest);
    ctx.log("downscale", "all", "rasters", double(n_rasters));
}

// -------------------------------------------------------------- validate ---

inline void stage_validate(StageContext& ctx) {
    auto adj_t = read_table(ctx.stage_input("rates_adjusted.csv", "adjust"));
    auto ref_t = read_table(ctx.input_file("refs"));

    // predicted series per (country, crop, nutrient)
    std::map<std::tuple<std::string, std::string, std::string>, YearSeries> pred;
    for (const auto& row : adj_t.rows)
        pred[{row[adj_t.col("country")], row[adj_t.col("crop")], row[adj_t.col("nutrient")]}]
            [int(parse_cell(row[adj_t.col("year")]))] =
                parse_cell(row[adj_t.col("rate_adjusted")]);

    std::map<std::tuple<std::string, std::string, std::string>, YearSeries> ref;
    for (const auto& row : ref_t.rows)
        ref[{row[ref_t.col("country")], row[ref_t.col("crop")], row[ref_t.col("nutrient")]}]
            [int(parse_cell(row[ref_t.col("year")]))] = parse_cell(row[ref_t.col("rate")]);

    std::map<std::pair<std::string, std::string>, ComparisonRow> rows;
    for (const auto& [key, ref_series] : ref) {
        const auto& [country, crop, nutrient] = key;
        ComparisonRow& row = rows[{country, crop}];
        row.country = country;
        row.crop = crop;
        YearSeries pred_series;
        if (nutrient == "NPK") {
            auto n = pred.find({country, crop, "N"});
            auto p = pred.find({country, crop, "P2O5"});
            auto k = pred.find({country, crop, "K2O"});
            if (n == pred.end() || p == pred.end() || k == pred.end()) continue;
            pred_series = npk_sum_series(n->second, p->second, k->second);
        } else {
            auto it = pred.find(key);
            if (it == pred.end()) continue;
            pred_series = it->second;
        }
        const auto mm = mae_mape(pred_series, ref_series);
        if (nutrient == "N") row.n = mm;
        else if (nutrient == "P2O5") row.p2o5 = mm;
        else if (nutrient == "K2O") row.k2o = mm;
        else if (nutrient == "NPK") row.npk = mm;
        else throw std::runtime_error("validate: unknown reference nutrient " + nutrient);

        Table series_t = comparison_series_table(pred_series, ref_series);
        write_table(ctx.out_path("series/" + country + "_" + crop + "_" + nutrient + ".csv"),
                    series_t);
    }

    std::vector<ComparisonRow> list;
    for (auto& [_, row] : rows) list.push_back(row);
    auto table = emit_validation_table(list);
    write_table(ctx.out_path("validation.tsv"), table, '\t');
    ctx.log("validate", "all", "rows", double(list.size()));
}

} // namespace stages

// Runs one subcommand; returns the process exit code. Partial outputs of a
// failing stage are removed.
inline int run_stage(const std::string& subcommand, const PipelineConfig& cfg,
                     std::ostream& log = std::cout) {
    static const std::vector<std::string> order = {"ingest", "train",     "explain", "shares",
                                                   "adjust", "downscale", "validate"};
    std::vector<std::string> todo;
    if (subcommand == "pipeline") {
        todo = order;
    } else if (std::find(order.begin(), order.end(), subcommand) != order.end()) {
        todo = {subcommand};
    } else {
        log << "unknown subcommand: " << subcommand << "\n";
        return 2;
    }

    std::vector<ManifestEntry> all_artifacts;
    for (const auto& stage : todo) {
        StageContext ctx(cfg, log);
        try {
            if (stage == "ingest") stages::stage_ingest(ctx);
            else if (stage == "train") stages::stage_train(ctx);
            else if (stage == "explain") stages::stage_explain(ctx);
            else if (stage == "shares") stages::stage_shares(ctx);
            else if (stage == "adjust") stages::stage_adjust(ctx);
            else if (stage == "downscale") stages::stage_downscale(ctx);
            else if (stage == "validate") stages::stage_validate(ctx);
        } catch (const ConfigError& e) {
            ctx.remove_written();
            log << "[" << stage << "] error config " << e.what() << "\n";
            return 2;
        } catch (const InfeasibleError& e) {
            ctx.remove_written();
            log << "[" << stage << "] error infeasible " << e.what() << "\n";
            return 4;
        } catch (const std::exception& e) {
            ctx.remove_written();
            log << "[" << stage << "] error data " << e.what() << "\n";
            return 3;
        }
        for (const auto& p : ctx.written()) {
            const auto rel =
                std::filesystem::relative(p, cfg.out_dir).generic_string();
            all_artifacts.push_back({rel, std::uint64_t(std::filesystem::file_size(p)),
                                     fnv1a64_file(p)});
        }
        log << "[" << stage << "] done artifacts=" << all_artifacts.size() << "\n";
    }

    if (subcommand == "pipeline") {
        write_manifest((std::filesystem::path(cfg.out_dir) / "manifest.txt").string(),
                       all_artifacts);
        log << "[pipeline] done manifest=manifest.txt\n";
    }
    return 0;
}

} // namespace fertgrid
