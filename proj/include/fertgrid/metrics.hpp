#pragma once
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fertgrid/common.hpp"

namespace fertgrid {

// Per-fold regression metrics. r2 is absent when y_true has zero variance.
struct FoldMetrics {
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    std::optional<double> r2;
};

inline FoldMetrics metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        throw std::invalid_argument("metrics: need equal nonzero lengths");
    const double n = double(y_true.size());
    double abs_sum = 0.0, sq_sum = 0.0, mean = 0.0;
    for (double y : y_true) mean += y;
    mean /= n;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = y_true[i] - y_pred[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
    }
    FoldMetrics out;
    out.mae = abs_sum / n;
    out.mse = sq_sum / n;
    out.rmse = std::sqrt(out.mse);
    if (ss_tot > 0.0) out.r2 = 1.0 - sq_sum / ss_tot;
    return out;
}

// The naive model of the performance table: predict the training-target mean.
inline double naive_baseline(std::span<const double> train_targets) {
    if (train_targets.empty()) throw std::invalid_argument("naive_baseline: empty targets");
    double s = 0.0;
    for (double y : train_targets) s += y;
    return s / double(train_targets.size());
}

// mean +- sample sd across outer folds
struct MetricReport {
    std::vector<FoldMetrics> folds;
    MeanSd mae, mse, rmse, r2;
    std::size_t r2_defined = 0; // folds contributing to r2

    static MetricReport from_folds(std::vector<FoldMetrics> fs) {
        MetricReport rep;
        rep.folds = std::move(fs);
        std::vector<double> a, b, c, d;
        for (const auto& f : rep.folds) {
            a.push_back(f.mae);
            b.push_back(f.mse);
            c.push_back(f.rmse);
            if (f.r2) d.push_back(*f.r2);
        }
        rep.mae = mean_sd(a);
        rep.mse = mean_sd(b);
        rep.rmse = mean_sd(c);
        rep.r2 = mean_sd(d);
        rep.r2_defined = d.size();
        return rep;
    }
};

} // namespace fertgrid
