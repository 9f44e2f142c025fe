#pragma once
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fertgrid/matrix.hpp"

namespace fertgrid {

// Quantile histogram of one column. `edges` are the interior cut points
// (strictly increasing); values route to the first edge they do not exceed.
// Bin indices run 0..n_bins()-1, and n_bins() is the reserved missing bin.
struct BinnedColumn {
    std::vector<double> edges;
    int n_bins() const { return int(edges.size()) + 1; }
    int missing_bin() const { return n_bins(); }

    int bin_of(double v) const {
        if (is_missing(v)) return missing_bin();
        return int(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
    }
};

struct BinnedMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<BinnedColumn> cols;
    // column-major codes, codes[c][r]; value n_bins(c) marks missing
    std::vector<std::vector<std::uint16_t>> codes;
};

// Quantile cuts over the non-missing values of each numeric column, at most
// max_bins bins plus the missing bin. Columns with fewer distinct values than
// bins get one singleton bin per value, edges at midpoints. Binary columns
// get exactly two bins.
inline BinnedMatrix build_bins(const FeatureMatrix& m, int max_bins) {
    if (m.n_rows == 0) throw std::runtime_error("no rows");
    if (max_bins < 1 || max_bins > 256)
        throw std::invalid_argument("max_bins must be in [1,256]");

    BinnedMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.cols.resize(m.n_cols);
    out.codes.resize(m.n_cols);

    std::vector<double> vals;
    for (std::size_t c = 0; c < m.n_cols; ++c) {
        BinnedColumn& col = out.cols[c];
        if (m.col_kinds[c] == ColKind::OneHotBinary) {
            col.edges = {0.5};
        } else {
            vals.clear();
            for (std::size_t r = 0; r < m.n_rows; ++r) {
                double v = m.at(r, c);
                if (!is_missing(v)) vals.push_back(v);
            }
            std::sort(vals.begin(), vals.end());
            const std::size_t n = vals.size();
            if (n > 0) {
                std::vector<double> distinct;
                distinct.reserve(vals.size());
                for (double v : vals)
                    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
                if (int(distinct.size()) <= max_bins) {
                    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
                        col.edges.push_back(0.5 * (distinct[i] + distinct[i + 1]));
                } else {
                    // cut after the ceil(n*k/B)-th sorted sample, dedup
                    for (int k = 1; k < max_bins; ++k) {
                        std::size_t pos = (n * std::size_t(k) + std::size_t(max_bins) - 1) /
                                          std::size_t(max_bins);
                        if (pos == 0 || pos >= n) continue;
                        if (vals[pos - 1] == vals[pos]) continue;
                        double e = 0.5 * (vals[pos - 1] + vals[pos]);
                        if (col.edges.empty() || e > col.edges.back()) col.edges.push_back(e);
                    }
                }
            }
            // all-missing column: no edges, single (empty) value bin + missing bin
        }
        auto& code = out.codes[c];
        code.resize(m.n_rows);
        for (std::size_t r = 0; r < m.n_rows; ++r)
            code[r] = std::uint16_t(col.bin_of(m.at(r, c)));
    }
    return out;
}

} // namespace fertgrid
