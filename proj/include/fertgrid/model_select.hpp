#pragma once
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fertgrid/gbdt.hpp"
#include "fertgrid/metrics.hpp"

namespace fertgrid {

// Named hyperparameter -> candidate values; expanded as a full Cartesian
// product over a base config.
struct SearchGrid {
    std::vector<std::pair<std::string, std::vector<double>>> params;

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& [_, vals] : params) n *= vals.size();
        return n;
    }
};

inline void apply_param(GbdtConfig& cfg, const std::string& name, double v) {
    if (name == "max_depth") cfg.max_depth = int(v);
    else if (name == "n_trees" || name == "max_iter" || name == "n_estimators") cfg.n_trees = int(v);
    else if (name == "learning_rate") cfg.learning_rate = v;
    else if (name == "min_samples_leaf") cfg.min_samples_leaf = int(v);
    else if (name == "max_bins") cfg.max_bins = int(v);
    else if (name == "subsample") cfg.subsample = v;
    else if (name == "colsample" || name == "colsample_by_tree") cfg.colsample = v;
    else if (name == "min_child_weight") cfg.min_child_weight = v;
    else throw std::invalid_argument("unknown hyperparameter: " + name);
}

inline std::vector<GbdtConfig> expand_grid(const SearchGrid& grid, const GbdtConfig& base) {
    if (grid.params.empty()) return {base};
    for (const auto& [name, vals] : grid.params)
        if (vals.empty()) throw std::invalid_argument("empty value list for " + name);
    std::vector<GbdtConfig> out;
    std::vector<std::size_t> pos(grid.params.size(), 0);
    for (;;) {
        GbdtConfig cfg = base;
        for (std::size_t i = 0; i < grid.params.size(); ++i)
            apply_param(cfg, grid.params[i].first, grid.params[i].second[pos[i]]);
        out.push_back(cfg);
        std::size_t i = grid.params.size();
        while (i > 0) {
            --i;
            if (++pos[i] < grid.params[i].second.size()) break;
            pos[i] = 0;
            if (i == 0) return out;
        }
    }
}

// Seeded uniform shuffle, then contiguous blocks. Folds partition [0, n).
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                           std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold: need k >= 2");
    if (n < k) throw std::runtime_error("kfold: fewer rows than folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = n / k, extra = n % k;
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + std::ptrdiff_t(at),
                        order.begin() + std::ptrdiff_t(at + len));
        at += len;
    }
    return folds;
}

namespace detail {

inline std::vector<std::size_t> take_targets_idx(std::size_t n,
                                                 const std::vector<std::size_t>& drop) {
    std::vector<bool> is_drop(n, false);
    for (std::size_t i : drop) is_drop[i] = true;
    std::vector<std::size_t> keep;
    keep.reserve(n - drop.size());
    for (std::size_t i = 0; i < n; ++i)
        if (!is_drop[i]) keep.push_back(i);
    return keep;
}

inline std::vector<double> gather(const std::vector<double>& v,
                                  const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

} // namespace detail

struct GridSearchResult {
    GbdtConfig best;
    std::size_t best_index = 0;
    std::vector<double> mean_mse; // one per grid point, expansion order
    std::vector<std::vector<std::size_t>> inner_folds; // local row indices
};

// Exhaustive k_inner-fold CV over the expanded grid; minimises mean
// validation MSE. Two exact sharings keep the full product affordable:
// binning is reused across grid points with the same max_bins, and grid
// points differing only in n_trees are staged predictions of one fit (tree t
// never depends on n_trees, so the shorter models are prefixes of the
// longest one).
inline GridSearchResult grid_search(const FeatureMatrix& m, const std::vector<double>& y,
                                    const SearchGrid& grid, std::size_t k_inner,
                                    const GbdtConfig& base, std::uint64_t seed) {
    if (k_inner < 2) throw std::invalid_argument("grid_search: k_inner >= 2 required");
    const auto configs = expand_grid(grid, base);
    GridSearchResult res;
    res.inner_folds = kfold_indices(m.n_rows, k_inner, seed);
    res.mean_mse.assign(configs.size(), 0.0);

    // group indices by the config with n_trees erased
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> group_order;
    for (std::size_t g = 0; g < configs.size(); ++g) {
        std::ostringstream key;
        const GbdtConfig& c = configs[g];
        key << c.max_depth << '|' << c.learning_rate << '|' << c.min_samples_leaf << '|'
            << c.max_bins << '|' << c.subsample << '|' << c.colsample << '|'
            << c.min_child_weight;
        auto [it, fresh] = groups.try_emplace(key.str());
        if (fresh) group_order.push_back(key.str());
        it->second.push_back(g);
    }

    for (std::size_t f = 0; f < k_inner; ++f) {
        const auto& val_idx = res.inner_folds[f];
        const auto train_idx = detail::take_targets_idx(m.n_rows, val_idx);
        const FeatureMatrix train_m = m.take_rows(train_idx);
        const FeatureMatrix val_m = m.take_rows(val_idx);
        const auto train_y = detail::gather(y, train_idx);
        const auto val_y = detail::gather(y, val_idx);

        std::map<int, BinnedMatrix> binned; // keyed by max_bins
        for (const auto& key : group_order) {
            auto members = groups.at(key); // grid indices sharing all but n_trees
            std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                return configs[a].n_trees < configs[b].n_trees;
            });
            GbdtConfig fit_cfg = configs[members.back()]; // largest tree count
            auto it = binned.find(fit_cfg.max_bins);
            if (it == binned.end())
                it = binned.emplace(fit_cfg.max_bins, build_bins(train_m, fit_cfg.max_bins))
                         .first;
            const TreeEnsemble ens = fit_binned(it->second, train_m, train_y, fit_cfg);

            std::vector<double> acc(val_m.n_rows, ens.base_score);
            std::size_t next_tree = 0;
            for (std::size_t mi : members) {
                const std::size_t upto = std::size_t(configs[mi].n_trees);
                for (; next_tree < upto; ++next_tree)
                    for (std::size_t r = 0; r < val_m.n_rows; ++r)
                        acc[r] += predict_tree(
                            ens.trees[next_tree],
                            std::span<const double>(val_m.row(r), val_m.n_cols));
                res.mean_mse[mi] += metrics(val_y, acc).mse / double(k_inner);
            }
        }
    }

    res.best_index = 0;
    for (std::size_t g = 1; g < configs.size(); ++g)
        if (res.mean_mse[g] < res.mean_mse[res.best_index]) res.best_index = g;
    res.best = configs[res.best_index];
    return res;
}

struct NestedCvResult {
    MetricReport report;
    std::vector<GbdtConfig> fold_configs; // winner per outer fold
    std::vector<std::vector<std::size_t>> outer_folds; // global row indices
    // audit: per outer fold, per inner fold, the global row ids used
    std::vector<std::vector<std::vector<std::size_t>>> inner_fold_rows;
};

inline NestedCvResult nested_cv(const FeatureMatrix& m, const std::vector<double>& y,
                                const SearchGrid& grid, std::size_t k_outer, std::size_t k_inner,
                                const GbdtConfig& base, std::uint64_t seed) {
    NestedCvResult res;
    res.outer_folds = kfold_indices(m.n_rows, k_outer, seed);
    std::vector<FoldMetrics> folds;
    for (std::size_t f = 0; f < k_outer; ++f) {
        const auto& test_idx = res.outer_folds[f];
        const auto train_idx = detail::take_targets_idx(m.n_rows, test_idx);
        const FeatureMatrix train_m = m.take_rows(train_idx);
        const auto train_y = detail::gather(y, train_idx);

        GridSearchResult gs =
            grid_search(train_m, train_y, grid, k_inner, base, seed + 1 + f);
        res.fold_configs.push_back(gs.best);

        std::vector<std::vector<std::size_t>> inner_global;
        for (const auto& fold : gs.inner_folds) {
            std::vector<std::size_t> g;
            g.reserve(fold.size());
            for (std::size_t local : fold) g.push_back(train_idx[local]);
            inner_global.push_back(std::move(g));
        }
        res.inner_fold_rows.push_back(std::move(inner_global));

        const TreeEnsemble ens = fit(train_m, train_y, gs.best);
        const FeatureMatrix test_m = m.take_rows(test_idx);
        const auto test_y = detail::gather(y, test_idx);
        folds.push_back(metrics(test_y, predict(ens, test_m)));
    }
    res.report = MetricReport::from_folds(std::move(folds));
    return res;
}

// Majority vote over the outer-fold winners (tie -> first seen); the refit
// config used when a single production model is wanted.
inline GbdtConfig majority_config(const std::vector<GbdtConfig>& fold_configs) {
    if (fold_configs.empty()) throw std::invalid_argument("majority_config: empty");
    auto key = [](const GbdtConfig& c) {
        std::ostringstream s;
        s << c.max_depth << '|' << c.n_trees << '|' << c.learning_rate << '|'
          << c.min_samples_leaf << '|' << c.max_bins << '|' << c.subsample << '|'
          << c.colsample << '|' << c.min_child_weight;
        return s.str();
    };
    std::map<std::string, std::size_t> counts;
    for (const auto& c : fold_configs) counts[key(c)]++;
    std::size_t best_count = 0;
    GbdtConfig best = fold_configs.front();
    for (const auto& c : fold_configs) {
        const std::size_t cnt = counts[key(c)];
        if (cnt > best_count) {
            best_count = cnt;
            best = c;
        }
    }
    return best;
}

// One row of the emitted performance table.
struct MetricsTableRow {
    std::string fertilizer;
    std::string model;
    MetricReport report;
};

inline std::string format_mean_sd(const MeanSd& ms) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << ms.mean << " +- " << ms.sd;
    return s.str();
}

// fertilizer x model x {MAE, RMSE, MSE, R2} as "mean +- sd", tab-separated.
inline std::string metrics_table(const std::vector<MetricsTableRow>& rows) {
    std::ostringstream out;
    out << "fertilizer\tmodel\tMAE\tRMSE\tMSE\tR2\n";
    for (const auto& r : rows) {
        out << r.fertilizer << '\t' << r.model << '\t' << format_mean_sd(r.report.mae) << '\t'
            << format_mean_sd(r.report.rmse) << '\t' << format_mean_sd(r.report.mse) << '\t';
        if (r.report.r2_defined > 0)
            out << format_mean_sd(r.report.r2);
        else
            out << "NA";
        out << '\n';
    }
    return out.str();
}

} // namespace fertgrid
