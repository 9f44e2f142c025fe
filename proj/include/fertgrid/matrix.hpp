#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/common.hpp"
#include "fertgrid/csv.hpp"

namespace fertgrid {

enum class ColKind { Numeric, OneHotBinary };

// Row-major predictor matrix. Cells are finite reals or NaN (missing).
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;
    std::vector<ColKind> col_kinds;
    std::vector<std::string> col_names;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols)
        : n_rows(rows), n_cols(cols), values(rows * cols, kMissing),
          col_kinds(cols, ColKind::Numeric), col_names(cols) {
        for (std::size_t c = 0; c < cols; ++c) col_names[c] = "f" + std::to_string(c);
    }

    double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }

    void set(std::size_t r, std::size_t c, double v) {
        if (!std::isnan(v) && !std::isfinite(v))
            throw std::invalid_argument("FeatureMatrix cell must be finite or missing");
        values[r * n_cols + c] = v;
    }

    const double* row(std::size_t r) const { return values.data() + r * n_cols; }

    FeatureMatrix take_rows(const std::vector<std::size_t>& idx) const {
        FeatureMatrix out(idx.size(), n_cols);
        out.col_kinds = col_kinds;
        out.col_names = col_names;
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t c = 0; c < n_cols; ++c)
                out.values[i * n_cols + c] = at(idx[i], c);
        return out;
    }
};

// Canonical on-disk form: header row of column names, one "kind" column is
// not stored -- binary columns are recognised by their {0,1,missing} domain
// when read back.
inline void write_matrix(const std::string& path, const FeatureMatrix& m, char delim = ',') {
    Table t;
    t.columns = m.col_names;
    t.rows.reserve(m.n_rows);
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        std::vector<std::string> row(m.n_cols);
        for (std::size_t c = 0; c < m.n_cols; ++c) row[c] = format_cell(m.at(r, c));
        t.rows.push_back(std::move(row));
    }
    write_table(path, t, delim);
}

inline FeatureMatrix matrix_from_table(const Table& t) {
    if (t.rows.empty()) throw std::runtime_error("no rows");
    FeatureMatrix m(t.rows.size(), t.columns.size());
    m.col_names = t.columns;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            m.set(r, c, parse_cell(t.rows[r][c]));
    for (std::size_t c = 0; c < m.n_cols; ++c) {
        bool binary = true;
        for (std::size_t r = 0; r < m.n_rows && binary; ++r) {
            double v = m.at(r, c);
            if (!is_missing(v) && v != 0.0 && v != 1.0) binary = false;
        }
        m.col_kinds[c] = binary ? ColKind::OneHotBinary : ColKind::Numeric;
    }
    return m;
}

inline FeatureMatrix read_matrix(const std::string& path, char delim = ',') {
    return matrix_from_table(read_table(path, delim));
}

} // namespace fertgrid
