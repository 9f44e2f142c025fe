#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fertgrid/binning.hpp"
#include "fertgrid/common.hpp"
#include "fertgrid/matrix.hpp"

namespace fertgrid {

struct GbdtConfig {
    int max_depth = 6;
    int n_trees = 100;
    double learning_rate = 0.1;
    int min_samples_leaf = 20;
    int max_bins = 256;
    double subsample = 1.0;
    double colsample = 1.0;
    double min_child_weight = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_depth < 1 || n_trees < 1 || min_samples_leaf < 1)
            throw std::invalid_argument("GbdtConfig counts must be >= 1");
        if (!(learning_rate > 0.0) || learning_rate > 1.0)
            throw std::invalid_argument("learning_rate must be in (0,1]");
        if (max_bins < 1 || max_bins > 256)
            throw std::invalid_argument("max_bins must be in [1,256]");
        if (!(subsample > 0.0) || subsample > 1.0 || !(colsample > 0.0) || colsample > 1.0)
            throw std::invalid_argument("subsample/colsample must be in (0,1]");
        if (min_child_weight < 0.0)
            throw std::invalid_argument("min_child_weight must be >= 0");
    }
};

// feature < 0 marks a leaf. Rows with value <= threshold go left; missing
// values follow missing_left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double cover = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // root at 0, preorder
};

struct TreeEnsemble {
    double base_score = 0.0;
    std::size_t n_features = 0;
    std::vector<Tree> trees;
};

inline double predict_tree(const Tree& tree, std::span<const double> row) {
    int i = 0;
    while (!tree.nodes[i].is_leaf()) {
        const TreeNode& nd = tree.nodes[i];
        const double v = row[std::size_t(nd.feature)];
        if (is_missing(v))
            i = nd.missing_left ? nd.left : nd.right;
        else
            i = v <= nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[i].value;
}

inline double predict(const TreeEnsemble& ens, std::span<const double> row) {
    if (row.size() != ens.n_features)
        throw std::invalid_argument("predict: row arity " + std::to_string(row.size()) +
                                    " != training arity " + std::to_string(ens.n_features));
    double out = ens.base_score;
    for (const Tree& t : ens.trees) out += predict_tree(t, row);
    return out;
}

inline std::vector<double> predict(const TreeEnsemble& ens, const FeatureMatrix& m) {
    std::vector<double> out(m.n_rows);
    for (std::size_t r = 0; r < m.n_rows; ++r)
        out[r] = predict(ens, std::span<const double>(m.row(r), m.n_cols));
    return out;
}

namespace detail {

struct SplitChoice {
    bool found = false;
    double gain = 0.0;
    int feature = -1;
    int bin = -1; // split after this bin; threshold = edges[bin]
    bool missing_left = true;
    double left_sum = 0.0;
    std::size_t left_cnt = 0;
};

struct NodeJob {
    int node = 0;
    int depth = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    double sum = 0.0;
};

// rows[begin, end) of the training sample that landed in one leaf
struct LeafSegment {
    std::size_t begin = 0;
    std::size_t end = 0;
    double value = 0.0;
};

// One gradient tree on pre-binned data. `rows` is the (sorted) sample of row
// ids this tree trains on; residuals indexed by original row id. Histograms
// are sparse: only touched bins are scanned and cleared, so small nodes cost
// O(rows) rather than O(bins).
inline Tree grow_tree(const BinnedMatrix& bm, const std::vector<double>& residual,
                      std::vector<std::size_t>& rows, const std::vector<int>& features,
                      const GbdtConfig& cfg, std::vector<LeafSegment>* leaf_segments = nullptr) {
    Tree tree;
    std::vector<NodeJob> stack;
    {
        double s = 0.0;
        for (std::size_t r : rows) s += residual[r];
        tree.nodes.push_back(TreeNode{});
        stack.push_back(NodeJob{0, 0, 0, rows.size(), s});
    }

    int max_nb = 0;
    for (const auto& col : bm.cols) max_nb = std::max(max_nb, col.n_bins());
    std::vector<double> hist_sum(std::size_t(max_nb) + 1, 0.0);
    std::vector<std::uint32_t> hist_cnt(std::size_t(max_nb) + 1, 0);
    std::vector<int> touched;
    touched.reserve(std::size_t(max_nb) + 1);
    std::vector<std::size_t> scratch;

    // reciprocal counts keep the gain loop division-free
    std::vector<double> inv(rows.size() + 1, 0.0);
    for (std::size_t k = 1; k < inv.size(); ++k) inv[k] = 1.0 / double(k);

    const std::size_t msl = std::size_t(cfg.min_samples_leaf);
    const double mcw = cfg.min_child_weight;

    while (!stack.empty()) {
        NodeJob job = stack.back();
        stack.pop_back();
        const std::size_t n = job.end - job.begin;
        TreeNode& node = tree.nodes[std::size_t(job.node)];
        node.cover = double(n);

        SplitChoice best;
        if (job.depth < cfg.max_depth && n >= 2 * msl && double(n) >= 2.0 * mcw) {
            const double parent = job.sum * job.sum * inv[n];
            for (int f : features) {
                const BinnedColumn& col = bm.cols[std::size_t(f)];
                const int nb = col.n_bins();
                if (nb < 2) continue; // no interior cut
                touched.clear();
                int lo = nb;
                int hi = -1;
                const auto& code = bm.codes[std::size_t(f)];
                for (std::size_t k = job.begin; k < job.end; ++k) {
                    const std::size_t r = rows[k];
                    const int b = code[r];
                    if (hist_cnt[std::size_t(b)]++ == 0) touched.push_back(b);
                    hist_sum[std::size_t(b)] += residual[r];
                    lo = b < lo ? b : lo;
                    hi = b > hi ? b : hi;
                }
                // small nodes scan their few occupied bins in sorted order;
                // dense nodes walk the occupied range directly
                const bool sparse = touched.size() < 32;
                if (sparse) {
                    for (std::size_t i = 1; i < touched.size(); ++i) {
                        const int v = touched[i];
                        std::size_t j = i;
                        for (; j > 0 && touched[j - 1] > v; --j) touched[j] = touched[j - 1];
                        touched[j] = v;
                    }
                }
                const double miss_sum = hist_sum[std::size_t(nb)];
                const std::size_t miss_cnt = hist_cnt[std::size_t(nb)];
                double acc_sum = 0.0;
                std::size_t acc_cnt = 0;
                const int dirs = miss_cnt == 0 ? 1 : 2; // no missing rows: left only

                auto consider = [&](int b, double ls0, std::size_t lc0) {
                    for (int d = 0; d < dirs; ++d) {
                        const bool mleft = d == 0;
                        const double ls = mleft ? ls0 + miss_sum : ls0;
                        const std::size_t lc = mleft ? lc0 + miss_cnt : lc0;
                        const std::size_t rc = n - lc;
                        if (lc < msl || rc < msl) continue;
                        if (double(lc) < mcw || double(rc) < mcw) continue;
                        const double rs = job.sum - ls;
                        const double gain = ls * ls * inv[lc] + rs * rs * inv[rc] - parent;
                        if (gain > best.gain) {
                            best.found = true;
                            best.gain = gain;
                            best.feature = f;
                            best.bin = b;
                            best.missing_left = mleft;
                            best.left_sum = ls;
                            best.left_cnt = lc;
                        }
                    }
                };

                // distinct partitions occur at occupied bins, plus the
                // missing-only split when bin 0 is empty
                if (lo > 0 && nb >= 2) consider(0, 0.0, 0);
                if (sparse) {
                    for (int b : touched) {
                        if (b >= nb) break; // missing bin sorts last
                        acc_sum += hist_sum[std::size_t(b)];
                        acc_cnt += hist_cnt[std::size_t(b)];
                        if (b + 1 < nb) consider(b, acc_sum, acc_cnt);
                    }
                } else {
                    const int scan_hi = std::min(hi, nb - 2);
                    for (int b = lo; b <= scan_hi; ++b) {
                        if (hist_cnt[std::size_t(b)] == 0) continue;
                        acc_sum += hist_sum[std::size_t(b)];
                        acc_cnt += hist_cnt[std::size_t(b)];
                        consider(b, acc_sum, acc_cnt);
                    }
                }
                for (int b : touched) {
                    hist_sum[std::size_t(b)] = 0.0;
                    hist_cnt[std::size_t(b)] = 0;
                }
            }
        }

        if (!best.found) {
            node.feature = -1;
            node.value = cfg.learning_rate * (n ? job.sum / double(n) : 0.0);
            if (leaf_segments) leaf_segments->push_back({job.begin, job.end, node.value});
            continue;
        }

        node.feature = best.feature;
        node.threshold = bm.cols[std::size_t(best.feature)].edges[std::size_t(best.bin)];
        node.missing_left = best.missing_left;

        // stable partition of the node's rows: left block then right block
        scratch.clear();
        const auto& code = bm.codes[std::size_t(best.feature)];
        const int nb = bm.cols[std::size_t(best.feature)].n_bins();
        std::size_t w = job.begin;
        for (std::size_t k = job.begin; k < job.end; ++k) {
            const std::size_t r = rows[k];
            const int b = code[r];
            const bool left = b == nb ? best.missing_left : b <= best.bin;
            if (left)
                rows[w++] = r;
            else
                scratch.push_back(r);
        }
        std::copy(scratch.begin(), scratch.end(), rows.begin() + std::ptrdiff_t(w));

        const int li = int(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        const int ri = int(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes[std::size_t(job.node)].left = li;
        tree.nodes[std::size_t(job.node)].right = ri;

        // right first so the left child is processed next (preorder layout)
        stack.push_back(NodeJob{ri, job.depth + 1, w, job.end, job.sum - best.left_sum});
        stack.push_back(NodeJob{li, job.depth + 1, job.begin, w, best.left_sum});
    }
    return tree;
}

} // namespace detail

// Gradient boosting on pre-binned data. `raw` must be the matrix the binning
// was built from; it is used to route rows when updating predictions.
inline TreeEnsemble fit_binned(const BinnedMatrix& bm, const FeatureMatrix& raw,
                               const std::vector<double>& targets, const GbdtConfig& cfg) {
    cfg.validate();
    const std::size_t n = bm.n_rows;
    if (targets.size() != n)
        throw std::invalid_argument("fit: targets length != n_rows");
    for (double y : targets)
        if (!std::isfinite(y)) throw std::invalid_argument("fit: non-finite target");

    TreeEnsemble ens;
    ens.n_features = bm.n_cols;
    double mean = 0.0;
    for (double y : targets) mean += y;
    ens.base_score = mean / double(n);

    std::vector<double> residual(n);
    for (std::size_t r = 0; r < n; ++r) residual[r] = targets[r] - ens.base_score;

    Rng rng(cfg.seed);
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t(0));
    std::vector<int> all_cols(bm.n_cols);
    std::iota(all_cols.begin(), all_cols.end(), 0);

    const std::size_t n_sample =
        std::max<std::size_t>(1, std::size_t(std::llround(cfg.subsample * double(n))));
    const std::size_t n_feat = std::max<std::size_t>(
        1, std::size_t(std::llround(cfg.colsample * double(bm.n_cols))));

    std::vector<std::size_t> rows;
    std::vector<int> feats;
    std::vector<detail::LeafSegment> segments;
    std::vector<bool> sampled(n, true);
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng tree_rng = rng.fork(std::uint64_t(t));
        if (n_sample < n) {
            rows = all_rows;
            tree_rng.shuffle(rows);
            rows.resize(n_sample);
            std::sort(rows.begin(), rows.end());
            sampled.assign(n, false);
            for (std::size_t r : rows) sampled[r] = true;
        } else {
            rows = all_rows;
        }
        if (n_feat < bm.n_cols) {
            feats = all_cols;
            tree_rng.shuffle(feats);
            feats.resize(n_feat);
            std::sort(feats.begin(), feats.end());
        } else {
            feats = all_cols;
        }

        segments.clear();
        Tree tree = detail::grow_tree(bm, residual, rows, feats, cfg, &segments);
        // sampled rows sit in exactly one leaf segment; only out-of-sample
        // rows need a tree walk
        for (const auto& seg : segments)
            for (std::size_t k = seg.begin; k < seg.end; ++k) residual[rows[k]] -= seg.value;
        if (n_sample < n)
            for (std::size_t r = 0; r < n; ++r)
                if (!sampled[r])
                    residual[r] -=
                        predict_tree(tree, std::span<const double>(raw.row(r), raw.n_cols));
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

inline TreeEnsemble fit(const FeatureMatrix& m, const std::vector<double>& targets,
                        const GbdtConfig& cfg) {
    cfg.validate();
    BinnedMatrix bm = build_bins(m, cfg.max_bins);
    return fit_binned(bm, m, targets, cfg);
}

} // namespace fertgrid
