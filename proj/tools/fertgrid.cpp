// Command-line front end: one subcommand per pipeline stage plus `pipeline`
// for the whole run. Exit codes: 0 success, 2 config error, 3 data error,
// 4 infeasible allocation target.
#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "fertgrid/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fertilizer application-rate modeling and downscaling pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool have_seed_override = false;

    const std::vector<std::string> stages = {"ingest",  "train",     "explain",  "shares",
                                             "adjust",  "downscale", "validate", "pipeline"};
    const std::map<std::string, std::string> descr = {
        {"ingest", "harmonize rate records and build the encoded feature matrices"},
        {"train", "nested-CV model selection, metrics table, production models"},
        {"explain", "SHAP attribution matrices and importance rankings"},
        {"shares", "grassland/fodder share series from country rules"},
        {"adjust", "reconcile predictions to national nutrient budgets"},
        {"downscale", "gridded harvested areas and fertilizer mass rasters"},
        {"validate", "MAE/MAPE comparison against reference series"},
        {"pipeline", "run every stage in order and write the manifest"}};

    for (const auto& name : stages) {
        auto* sub = app.add_subcommand(name, descr.at(name));
        sub->add_option("-c,--config", config_path, "pipeline config (json)")->required();
        sub->add_option("--out", out_override, "override the output directory");
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { have_seed_override = true; });
    }

    CLI11_PARSE(app, argc, argv);
    const std::string subcommand = app.get_subcommands().front()->get_name();

    fertgrid::PipelineConfig cfg;
    try {
        cfg = fertgrid::PipelineConfig::load(config_path);
        if (!out_override.empty()) {
            cfg.out_dir = out_override;
            cfg.paths["out"] = out_override;
        }
        if (have_seed_override) {
            cfg.seed = seed_override;
            cfg.model.seed = seed_override;
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return fertgrid::run_stage(subcommand, cfg);
}
