#pragma once
// Independent oracles used by the test suites. These deliberately avoid the
// library's fast paths: brute-force enumeration and direct definitions only.
#include <cmath>
#include <span>
#include <vector>

#include "fertgrid/gbdt.hpp"

namespace oracles {

using fertgrid::Tree;
using fertgrid::TreeEnsemble;
using fertgrid::TreeNode;

// Cover-weighted conditional expectation E[f(x) | x_S]: features in S follow
// the row's routing (missing direction included), features outside S split
// the flow by child covers.
inline double cond_exp(const Tree& tree, int node, unsigned subset,
                       std::span<const double> row) {
    const TreeNode& nd = tree.nodes[std::size_t(node)];
    if (nd.is_leaf()) return nd.value;
    if (subset & (1u << unsigned(nd.feature))) {
        const double v = row[std::size_t(nd.feature)];
        int next;
        if (fertgrid::is_missing(v))
            next = nd.missing_left ? nd.left : nd.right;
        else
            next = v <= nd.threshold ? nd.left : nd.right;
        return cond_exp(tree, next, subset, row);
    }
    const double cl = tree.nodes[std::size_t(nd.left)].cover;
    const double cr = tree.nodes[std::size_t(nd.right)].cover;
    return (cl * cond_exp(tree, nd.left, subset, row) +
            cr * cond_exp(tree, nd.right, subset, row)) /
           nd.cover;
}

inline double ensemble_cond_exp(const TreeEnsemble& ens, unsigned subset,
                                std::span<const double> row) {
    double v = ens.base_score;
    for (const Tree& t : ens.trees) v += cond_exp(t, 0, subset, row);
    return v;
}

// Exact Shapley values by exhaustive subset enumeration (2^F games).
inline std::vector<double> brute_force_shap(const TreeEnsemble& ens,
                                            std::span<const double> row) {
    const unsigned F = unsigned(ens.n_features);
    std::vector<double> fact(F + 1, 1.0);
    for (unsigned i = 1; i <= F; ++i) fact[i] = fact[i - 1] * double(i);

    std::vector<double> value(1u << F);
    for (unsigned s = 0; s < (1u << F); ++s) value[s] = ensemble_cond_exp(ens, s, row);

    std::vector<double> phi(F, 0.0);
    for (unsigned j = 0; j < F; ++j) {
        for (unsigned s = 0; s < (1u << F); ++s) {
            if (s & (1u << j)) continue;
            unsigned size = unsigned(std::popcount(s));
            const double w = fact[size] * fact[F - size - 1] / fact[F];
            phi[j] += w * (value[s | (1u << j)] - value[s]);
        }
    }
    return phi;
}

// Exhaustive single-split search on raw values: every feature, every midpoint
// between adjacent distinct values, both missing routings. Returns the best
// SSE-reducing stump description.
struct BestStump {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    double left_mean = 0.0, right_mean = 0.0;
    double sse = 0.0;
};

inline BestStump exhaustive_stump(const fertgrid::FeatureMatrix& m,
                                  const std::vector<double>& y, std::size_t min_leaf) {
    BestStump best;
    double base_sse = 0.0;
    {
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= double(y.size());
        for (double v : y) base_sse += (v - mean) * (v - mean);
    }
    best.sse = base_sse;
    for (std::size_t f = 0; f < m.n_cols; ++f) {
        std::vector<double> vals;
        for (std::size_t r = 0; r < m.n_rows; ++r)
            if (!fertgrid::is_missing(m.at(r, f))) vals.push_back(m.at(r, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            const double thr = 0.5 * (vals[i] + vals[i + 1]);
            for (int mleft = 1; mleft >= 0; --mleft) {
                double ls = 0, rs = 0;
                std::size_t lc = 0, rc = 0;
                for (std::size_t r = 0; r < m.n_rows; ++r) {
                    const double v = m.at(r, f);
                    const bool left =
                        fertgrid::is_missing(v) ? bool(mleft) : v <= thr;
                    if (left) { ls += y[r]; lc++; } else { rs += y[r]; rc++; }
                }
                if (lc < min_leaf || rc < min_leaf) continue;
                double sse = 0.0;
                const double lm = ls / double(lc), rm = rs / double(rc);
                for (std::size_t r = 0; r < m.n_rows; ++r) {
                    const double v = m.at(r, f);
                    const bool left =
                        fertgrid::is_missing(v) ? bool(mleft) : v <= thr;
                    const double e = y[r] - (left ? lm : rm);
                    sse += e * e;
                }
                if (sse < best.sse - 1e-12) {
                    best.found = true;
                    best.feature = int(f);
                    best.threshold = thr;
                    best.missing_left = bool(mleft);
                    best.left_mean = lm;
                    best.right_mean = rm;
                    best.sse = sse;
                }
            }
        }
    }
    return best;
}

} // namespace oracles
