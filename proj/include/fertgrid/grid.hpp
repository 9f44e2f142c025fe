#pragma once
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/common.hpp"

namespace fertgrid {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }

// Regular lat/lon grid. origin is the north-west corner; rows go south,
// columns go east. The global 5 arc-min convention is 4320x2160 from
// (90N, 180W).
struct GridSpec {
    int n_rows = 0;
    int n_cols = 0;
    double cell_deg = 0.0;
    double origin_lat = 90.0;
    double origin_lon = -180.0;
    std::string datum = "WGS84";

    void validate() const {
        if (n_rows < 1 || n_cols < 1 || !(cell_deg > 0.0))
            throw std::invalid_argument("GridSpec: rows/cols >= 1 and cell size > 0 required");
        if (double(n_rows) * cell_deg > 180.0 + 1e-9 ||
            double(n_cols) * cell_deg > 360.0 + 1e-9)
            throw std::invalid_argument("GridSpec: extent exceeds the globe");
    }

    static GridSpec global_5arcmin() {
        return GridSpec{2160, 4320, 5.0 / 60.0, 90.0, -180.0, "WGS84"};
    }

    std::size_t size() const { return std::size_t(n_rows) * std::size_t(n_cols); }

    double lat_top(int row) const { return origin_lat - double(row) * cell_deg; }
    double lat_bottom(int row) const { return origin_lat - double(row + 1) * cell_deg; }
    double lat_center(int row) const { return origin_lat - (double(row) + 0.5) * cell_deg; }
    double lon_center(int col) const { return origin_lon + (double(col) + 0.5) * cell_deg; }

    bool operator==(const GridSpec& o) const {
        return n_rows == o.n_rows && n_cols == o.n_cols && cell_deg == o.cell_deg &&
               origin_lat == o.origin_lat && origin_lon == o.origin_lon;
    }
};

// Single-band grid of doubles; NaN is nodata (distinct from 0 by construction).
struct Raster {
    GridSpec spec;
    std::vector<double> values;
    std::string unit;

    Raster() = default;
    explicit Raster(const GridSpec& s, double fill = 0.0, std::string u = "")
        : spec(s), values(s.size(), fill), unit(std::move(u)) {
        spec.validate();
    }

    double at(int r, int c) const { return values[std::size_t(r) * spec.n_cols + c]; }
    double& at(int r, int c) { return values[std::size_t(r) * spec.n_cols + c]; }
    bool in_range(int r, int c) const {
        return r >= 0 && r < spec.n_rows && c >= 0 && c < spec.n_cols;
    }
};

inline void require_same_grid(const Raster& a, const Raster& b) {
    if (!(a.spec == b.spec)) throw std::invalid_argument("rasters do not share a GridSpec");
}

// Spherical band area: A = R^2 * dlon * (sin(top) - sin(bottom)), in hectares.
// Constant across the columns of a row.
inline double cell_area_ha(const GridSpec& spec, int row) {
    if (row < 0 || row >= spec.n_rows) throw std::invalid_argument("cell_area_ha: row out of range");
    const double dlon = deg2rad(spec.cell_deg);
    const double top = deg2rad(spec.lat_top(row));
    const double bottom = deg2rad(spec.lat_bottom(row));
    const double area_m2 = kEarthRadiusM * kEarthRadiusM * dlon * (std::sin(top) - std::sin(bottom));
    return area_m2 / 1e4;
}

// Great-circle distance between cell centers, meters (haversine).
inline double center_distance_m(const GridSpec& spec, int r1, int c1, int r2, int c2) {
    const double lat1 = deg2rad(spec.lat_center(r1));
    const double lat2 = deg2rad(spec.lat_center(r2));
    const double dlat = lat2 - lat1;
    const double dlon = deg2rad(spec.lon_center(c2) - spec.lon_center(c1));
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

} // namespace fertgrid
