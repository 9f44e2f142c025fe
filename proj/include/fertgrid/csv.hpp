#pragma once
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fertgrid/common.hpp"

namespace fertgrid {

// Delimiter-separated table with a declared header. Empty fields are the
// missing-value sentinel; no quoting (none of the project's columns embed
// the delimiter).
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::runtime_error("missing column: " + name);
    }

    bool has_col(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
};

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline Table read_table(const std::string& path, char delim = ',') {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table: " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty table: " + path);
    t.columns = split_line(line, delim);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line, delim);
        if (fields.size() != t.columns.size())
            throw std::runtime_error("ragged row in " + path + ": got " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(t.columns.size()));
        t.rows.push_back(std::move(fields));
    }
    return t;
}

inline void write_table(const std::string& path, const Table& t, char delim = ',') {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write table: " + path);
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        out << (i ? std::string(1, delim) : "") << t.columns[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? std::string(1, delim) : "") << row[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Empty field -> missing. Anything else must parse fully as a double.
inline double parse_cell(const std::string& s) {
    if (s.empty()) return kMissing;
    const char* b = s.data();
    const char* e = b + s.size();
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
        throw std::runtime_error("not a number: '" + s + "'");
    return v;
}

// Shortest decimal that round-trips the double (missing -> empty field).
inline std::string format_cell(double v) {
    if (is_missing(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = 0.0;
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        std::sscanf(buf, "%lf", &back);
        if (back == v) break;
    }
    return buf;
}

} // namespace fertgrid
