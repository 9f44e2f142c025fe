#pragma once
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/gbdt.hpp"

namespace fertgrid {

// Per-feature attributions for one explained row. base_value plus the sum of
// attributions equals the ensemble prediction (efficiency).
struct ShapVector {
    std::vector<double> phi;
    double base_value = 0.0;

    double total() const {
        double s = base_value;
        for (double p : phi) s += p;
        return s;
    }
};

namespace detail {

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0; // proportion of cold (excluded) paths that flow through
    double one_fraction = 0.0;  // whether the hot (included) path flows through
    double pweight = 0.0;       // proportion of feature subsets of each size
};

inline void extend_path(std::vector<PathElement>& path, int depth, double zero_fraction,
                        double one_fraction, int feature) {
    path[std::size_t(depth)] = PathElement{feature, zero_fraction, one_fraction,
                                           depth == 0 ? 1.0 : 0.0};
    for (int i = depth - 1; i >= 0; --i) {
        path[std::size_t(i + 1)].pweight +=
            one_fraction * path[std::size_t(i)].pweight * double(i + 1) / double(depth + 1);
        path[std::size_t(i)].pweight =
            zero_fraction * path[std::size_t(i)].pweight * double(depth - i) / double(depth + 1);
    }
}

inline void unwind_path(std::vector<PathElement>& path, int depth, int index) {
    const double one_fraction = path[std::size_t(index)].one_fraction;
    const double zero_fraction = path[std::size_t(index)].zero_fraction;
    double next = path[std::size_t(depth)].pweight;
    for (int j = depth - 1; j >= 0; --j) {
        if (one_fraction != 0.0) {
            const double tmp = path[std::size_t(j)].pweight;
            path[std::size_t(j)].pweight =
                next * double(depth + 1) / (double(j + 1) * one_fraction);
            next = tmp - path[std::size_t(j)].pweight * zero_fraction * double(depth - j) /
                             double(depth + 1);
        } else {
            path[std::size_t(j)].pweight = path[std::size_t(j)].pweight * double(depth + 1) /
                                           (zero_fraction * double(depth - j));
        }
    }
    for (int j = index; j < depth; ++j) {
        path[std::size_t(j)].feature = path[std::size_t(j + 1)].feature;
        path[std::size_t(j)].zero_fraction = path[std::size_t(j + 1)].zero_fraction;
        path[std::size_t(j)].one_fraction = path[std::size_t(j + 1)].one_fraction;
    }
}

inline double unwound_path_sum(const std::vector<PathElement>& path, int depth, int index) {
    const double one_fraction = path[std::size_t(index)].one_fraction;
    const double zero_fraction = path[std::size_t(index)].zero_fraction;
    double next = path[std::size_t(depth)].pweight;
    double total = 0.0;
    for (int j = depth - 1; j >= 0; --j) {
        if (one_fraction != 0.0) {
            const double tmp = next * double(depth + 1) / (double(j + 1) * one_fraction);
            total += tmp;
            next = path[std::size_t(j)].pweight -
                   tmp * zero_fraction * double(depth - j) / double(depth + 1);
        } else {
            total += path[std::size_t(j)].pweight * double(depth + 1) /
                     (zero_fraction * double(depth - j));
        }
    }
    return total;
}

inline int hot_child(const TreeNode& nd, std::span<const double> row) {
    const double v = row[std::size_t(nd.feature)];
    if (is_missing(v)) return nd.missing_left ? nd.left : nd.right;
    return v <= nd.threshold ? nd.left : nd.right;
}

inline void shap_recurse(const Tree& tree, std::span<const double> row, std::vector<double>& phi,
                         int node_idx, int unique_depth, std::vector<PathElement> path,
                         double parent_zero_fraction, double parent_one_fraction,
                         int parent_feature) {
    extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction, parent_feature);
    const TreeNode& nd = tree.nodes[std::size_t(node_idx)];

    if (nd.is_leaf()) {
        for (int i = 1; i <= unique_depth; ++i) {
            const double w = unwound_path_sum(path, unique_depth, i);
            const PathElement& el = path[std::size_t(i)];
            phi[std::size_t(el.feature)] +=
                w * (el.one_fraction - el.zero_fraction) * nd.value;
        }
        return;
    }

    const int hot = hot_child(nd, row);
    const int cold = hot == nd.left ? nd.right : nd.left;
    const double hot_cover = tree.nodes[std::size_t(hot)].cover;
    const double cold_cover = tree.nodes[std::size_t(cold)].cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int path_index = 1;
    for (; path_index <= unique_depth; ++path_index)
        if (path[std::size_t(path_index)].feature == nd.feature) break;
    if (path_index <= unique_depth) {
        incoming_zero = path[std::size_t(path_index)].zero_fraction;
        incoming_one = path[std::size_t(path_index)].one_fraction;
        unwind_path(path, unique_depth, path_index);
        unique_depth -= 1;
    }

    shap_recurse(tree, row, phi, hot, unique_depth + 1, path,
                 incoming_zero * hot_cover / nd.cover, incoming_one, nd.feature);
    shap_recurse(tree, row, phi, cold, unique_depth + 1, path,
                 incoming_zero * cold_cover / nd.cover, 0.0, nd.feature);
}

inline double tree_expected_value(const Tree& tree, int node_idx) {
    const TreeNode& nd = tree.nodes[std::size_t(node_idx)];
    if (nd.is_leaf()) return nd.value;
    const double cl = tree.nodes[std::size_t(nd.left)].cover;
    const double cr = tree.nodes[std::size_t(nd.right)].cover;
    return (cl * tree_expected_value(tree, nd.left) + cr * tree_expected_value(tree, nd.right)) /
           nd.cover;
}

} // namespace detail

// Path-dependent TreeSHAP with node covers as the background distribution.
// Missing features in the row follow the stored missing directions.
inline ShapVector tree_shap(const TreeEnsemble& ens, std::span<const double> row) {
    if (row.size() != ens.n_features)
        throw std::invalid_argument("tree_shap: row arity mismatch");
    for (const Tree& t : ens.trees)
        if (!(t.nodes[0].cover > 0.0))
            throw std::invalid_argument("tree_shap: ensemble has zero cover");

    ShapVector out;
    out.phi.assign(ens.n_features, 0.0);
    out.base_value = ens.base_score;
    for (const Tree& t : ens.trees) {
        out.base_value += detail::tree_expected_value(t, 0);
        if (t.nodes[0].is_leaf()) continue;
        int max_unique = 0;
        {
            // unique features on a path is bounded by node depth; size the buffer
            // by the longest root-to-leaf path
            std::vector<std::pair<int, int>> stack{{0, 1}};
            while (!stack.empty()) {
                auto [i, d] = stack.back();
                stack.pop_back();
                max_unique = std::max(max_unique, d);
                const TreeNode& nd = t.nodes[std::size_t(i)];
                if (!nd.is_leaf()) {
                    stack.push_back({nd.left, d + 1});
                    stack.push_back({nd.right, d + 1});
                }
            }
        }
        std::vector<detail::PathElement> path(std::size_t(max_unique) + 2);
        detail::shap_recurse(t, row, out.phi, 0, 0, path, 1.0, 1.0, -1);
    }
    return out;
}

// ----------------------------------------------------------------------------
// One-hot group aggregation and importance ranking
// ----------------------------------------------------------------------------

// Encoded column index -> group id; one-hot families share a group.
struct FeatureGrouping {
    std::vector<int> group_of_col;
    std::vector<std::string> group_names;

    std::size_t n_groups() const { return group_names.size(); }

    void check_covers(std::size_t n_cols) const {
        if (group_of_col.size() != n_cols)
            throw std::invalid_argument("grouping does not cover all columns");
        for (int g : group_of_col)
            if (g < 0 || std::size_t(g) >= group_names.size())
                throw std::invalid_argument("grouping references unknown group");
    }

    static FeatureGrouping identity(const std::vector<std::string>& names) {
        FeatureGrouping fg;
        fg.group_names = names;
        fg.group_of_col.resize(names.size());
        for (std::size_t i = 0; i < names.size(); ++i) fg.group_of_col[i] = int(i);
        return fg;
    }
};

inline ShapVector aggregate_groups(const ShapVector& shap, const FeatureGrouping& grouping) {
    grouping.check_covers(shap.phi.size());
    ShapVector out;
    out.base_value = shap.base_value;
    out.phi.assign(grouping.n_groups(), 0.0);
    for (std::size_t c = 0; c < shap.phi.size(); ++c)
        out.phi[std::size_t(grouping.group_of_col[c])] += shap.phi[c];
    return out;
}

struct ImportanceEntry {
    std::string group;
    double mean_abs_phi = 0.0;
};

// Descending mean |phi| over the rows of a SHAP matrix; top_k == 0 keeps all.
inline std::vector<ImportanceEntry> importance_ranking(
    const std::vector<std::vector<double>>& shap_matrix, const std::vector<std::string>& groups,
    std::size_t top_k = 0) {
    if (shap_matrix.empty()) throw std::invalid_argument("importance_ranking: empty matrix");
    std::vector<ImportanceEntry> out(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) out[g].group = groups[g];
    for (const auto& row : shap_matrix) {
        if (row.size() != groups.size())
            throw std::invalid_argument("importance_ranking: ragged matrix");
        for (std::size_t g = 0; g < groups.size(); ++g)
            out[g].mean_abs_phi += std::abs(row[g]);
    }
    for (auto& e : out) e.mean_abs_phi /= double(shap_matrix.size());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.mean_abs_phi > b.mean_abs_phi;
    });
    if (top_k > 0 && out.size() > top_k) out.resize(top_k);
    return out;
}

} // namespace fertgrid
