#pragma once
// Minimal GeoTIFF codec: single band, 32-bit IEEE float, uncompressed strips,
// little-endian, WGS84 geographic tags, nodata declared via the GDAL nodata
// tag. Covers exactly the files this pipeline emits and consumes.
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/grid.hpp"

namespace fertgrid {

namespace tiff {

constexpr std::uint16_t kTagImageWidth = 256;
constexpr std::uint16_t kTagImageLength = 257;
constexpr std::uint16_t kTagBitsPerSample = 258;
constexpr std::uint16_t kTagCompression = 259;
constexpr std::uint16_t kTagPhotometric = 262;
constexpr std::uint16_t kTagImageDescription = 270;
constexpr std::uint16_t kTagStripOffsets = 273;
constexpr std::uint16_t kTagSamplesPerPixel = 277;
constexpr std::uint16_t kTagRowsPerStrip = 278;
constexpr std::uint16_t kTagStripByteCounts = 279;
constexpr std::uint16_t kTagPlanarConfig = 284;
constexpr std::uint16_t kTagSampleFormat = 339;
constexpr std::uint16_t kTagModelPixelScale = 33550;
constexpr std::uint16_t kTagModelTiepoint = 33922;
constexpr std::uint16_t kTagGeoKeyDirectory = 34735;
constexpr std::uint16_t kTagGdalNodata = 42113;

constexpr std::uint16_t kTypeShort = 3;
constexpr std::uint16_t kTypeLong = 4;
constexpr std::uint16_t kTypeAscii = 2;
constexpr std::uint16_t kTypeDouble = 12;

struct Entry {
    std::uint16_t tag = 0;
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::uint32_t value = 0; // inline value or offset
};

inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(std::uint8_t(v & 0xff));
    b.push_back(std::uint8_t(v >> 8));
}

inline void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

inline void put_double(std::vector<std::uint8_t>& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) b.push_back(std::uint8_t((bits >> (8 * i)) & 0xff));
}

} // namespace tiff

inline void write_geotiff(const std::string& path, const Raster& raster) {
    raster.spec.validate();
    const std::uint32_t width = std::uint32_t(raster.spec.n_cols);
    const std::uint32_t height = std::uint32_t(raster.spec.n_rows);
    const std::uint32_t pixel_bytes = width * height * 4;

    // layout: header(8) | pixel data | out-of-line tag arrays | IFD
    const std::uint32_t data_off = 8;
    std::uint32_t at = data_off + pixel_bytes;

    std::vector<std::uint8_t> extra; // bytes appended after pixel data
    auto reserve_extra = [&](std::uint32_t n) {
        const std::uint32_t off = at;
        at += n;
        return off;
    };

    const std::uint32_t scale_off = reserve_extra(3 * 8);
    tiff::put_double(extra, raster.spec.cell_deg);
    tiff::put_double(extra, raster.spec.cell_deg);
    tiff::put_double(extra, 0.0);

    const std::uint32_t tie_off = reserve_extra(6 * 8);
    tiff::put_double(extra, 0.0);
    tiff::put_double(extra, 0.0);
    tiff::put_double(extra, 0.0);
    tiff::put_double(extra, raster.spec.origin_lon);
    tiff::put_double(extra, raster.spec.origin_lat);
    tiff::put_double(extra, 0.0);

    // GTModelType=geographic, GTRasterType=area, GeographicType=EPSG:4326
    const std::uint16_t geokeys[16] = {1, 1, 0,    3,    1024, 0, 1, 2,
                                       1025, 0, 1, 1,    2048, 0, 1, 4326};
    const std::uint32_t geo_off = reserve_extra(16 * 2);
    for (std::uint16_t v : geokeys) tiff::put16(extra, v);

    std::string nodata = "nan";
    nodata.push_back('\0');

    std::string descr = raster.unit;
    descr.push_back('\0');
    std::uint32_t descr_off = 0;
    if (descr.size() > 4) {
        descr_off = reserve_extra(std::uint32_t(descr.size()));
        for (char ch : descr) extra.push_back(std::uint8_t(ch));
    }

    const std::uint32_t ifd_off = at;

    std::vector<tiff::Entry> entries;
    auto add = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t count,
                   std::uint32_t value) {
        entries.push_back(tiff::Entry{tag, type, count, value});
    };
    add(tiff::kTagImageWidth, tiff::kTypeLong, 1, width);
    add(tiff::kTagImageLength, tiff::kTypeLong, 1, height);
    add(tiff::kTagBitsPerSample, tiff::kTypeShort, 1, 32);
    add(tiff::kTagCompression, tiff::kTypeShort, 1, 1);
    add(tiff::kTagPhotometric, tiff::kTypeShort, 1, 1);
    if (descr.size() > 4) {
        add(tiff::kTagImageDescription, tiff::kTypeAscii, std::uint32_t(descr.size()), descr_off);
    } else {
        std::uint32_t inl = 0;
        for (std::size_t i = 0; i < descr.size(); ++i)
            inl |= std::uint32_t(std::uint8_t(descr[i])) << (8 * i);
        add(tiff::kTagImageDescription, tiff::kTypeAscii, std::uint32_t(descr.size()), inl);
    }
    add(tiff::kTagStripOffsets, tiff::kTypeLong, 1, data_off);
    add(tiff::kTagSamplesPerPixel, tiff::kTypeShort, 1, 1);
    add(tiff::kTagRowsPerStrip, tiff::kTypeLong, 1, height);
    add(tiff::kTagStripByteCounts, tiff::kTypeLong, 1, pixel_bytes);
    add(tiff::kTagPlanarConfig, tiff::kTypeShort, 1, 1);
    add(tiff::kTagSampleFormat, tiff::kTypeShort, 1, 3);
    add(tiff::kTagModelPixelScale, tiff::kTypeDouble, 3, scale_off);
    add(tiff::kTagModelTiepoint, tiff::kTypeDouble, 6, tie_off);
    add(tiff::kTagGeoKeyDirectory, tiff::kTypeShort, 16, geo_off);
    {
        std::uint32_t inl = 0;
        for (std::size_t i = 0; i < nodata.size(); ++i)
            inl |= std::uint32_t(std::uint8_t(nodata[i])) << (8 * i);
        add(tiff::kTagGdalNodata, tiff::kTypeAscii, std::uint32_t(nodata.size()), inl);
    }

    std::vector<std::uint8_t> out;
    out.reserve(ifd_off + 6 + entries.size() * 12);
    out.push_back('I');
    out.push_back('I');
    tiff::put16(out, 42);
    tiff::put32(out, ifd_off);

    for (std::size_t i = 0; i < raster.values.size(); ++i) {
        const float f = float(raster.values[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        tiff::put32(out, bits);
    }
    out.insert(out.end(), extra.begin(), extra.end());

    tiff::put16(out, std::uint16_t(entries.size()));
    for (const auto& e : entries) {
        tiff::put16(out, e.tag);
        tiff::put16(out, e.type);
        tiff::put32(out, e.count);
        tiff::put32(out, e.value);
    }
    tiff::put32(out, 0); // no next IFD

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write raster: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw std::runtime_error("raster write failed: " + path);
}

namespace tiff {

struct Parser {
    std::vector<std::uint8_t> bytes;

    std::uint16_t u16(std::size_t off) const {
        if (off + 2 > bytes.size()) throw std::runtime_error("tiff: truncated");
        return std::uint16_t(bytes[off]) | std::uint16_t(bytes[off + 1]) << 8;
    }
    std::uint32_t u32(std::size_t off) const {
        if (off + 4 > bytes.size()) throw std::runtime_error("tiff: truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[off + std::size_t(i)]) << (8 * i);
        return v;
    }
    double f64(std::size_t off) const {
        if (off + 8 > bytes.size()) throw std::runtime_error("tiff: truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[off + std::size_t(i)]) << (8 * i);
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
};

} // namespace tiff

inline Raster read_geotiff(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open raster: " + path);
    tiff::Parser p;
    p.bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    if (p.bytes.size() < 8 || p.bytes[0] != 'I' || p.bytes[1] != 'I' || p.u16(2) != 42)
        throw std::runtime_error("not a little-endian tiff: " + path);

    const std::uint32_t ifd = p.u32(4);
    const std::uint16_t n_entries = p.u16(ifd);

    struct Field {
        std::uint16_t type = 0;
        std::uint32_t count = 0;
        std::uint32_t value = 0;
        std::size_t value_off = 0; // absolute offset of the value/offset cell
    };
    std::map<std::uint16_t, Field> fields;
    for (std::uint16_t i = 0; i < n_entries; ++i) {
        const std::size_t e = ifd + 2 + std::size_t(i) * 12;
        Field fd;
        const std::uint16_t tag = p.u16(e);
        fd.type = p.u16(e + 2);
        fd.count = p.u32(e + 4);
        fd.value = p.u32(e + 8);
        fd.value_off = e + 8;
        fields[tag] = fd;
    }

    auto get = [&](std::uint16_t tag) -> const Field& {
        auto it = fields.find(tag);
        if (it == fields.end())
            throw std::runtime_error("tiff: missing tag " + std::to_string(tag) + ": " + path);
        return it->second;
    };
    auto scalar = [&](std::uint16_t tag) -> std::uint32_t {
        const Field& fd = get(tag);
        if (fd.type == tiff::kTypeShort) return fd.value & 0xffff;
        return fd.value;
    };
    auto int_array = [&](const Field& fd) {
        std::vector<std::uint32_t> out;
        const std::size_t unit = fd.type == tiff::kTypeShort ? 2 : 4;
        const std::size_t total = unit * fd.count;
        const std::size_t base = total <= 4 ? fd.value_off : fd.value;
        for (std::uint32_t i = 0; i < fd.count; ++i)
            out.push_back(unit == 2 ? p.u16(base + 2 * i) : p.u32(base + 4 * i));
        return out;
    };

    if (scalar(tiff::kTagBitsPerSample) != 32 || scalar(tiff::kTagSampleFormat) != 3)
        throw std::runtime_error("tiff: expected float32 samples: " + path);
    if (scalar(tiff::kTagCompression) != 1)
        throw std::runtime_error("tiff: compressed files unsupported: " + path);
    if (fields.count(tiff::kTagSamplesPerPixel) && scalar(tiff::kTagSamplesPerPixel) != 1)
        throw std::runtime_error("tiff: expected single band: " + path);

    const std::uint32_t width = scalar(tiff::kTagImageWidth);
    const std::uint32_t height = scalar(tiff::kTagImageLength);

    const Field& scale_f = get(tiff::kTagModelPixelScale);
    const Field& tie_f = get(tiff::kTagModelTiepoint);
    if (scale_f.count < 2 || tie_f.count < 6)
        throw std::runtime_error("tiff: bad geo tags: " + path);
    const double sx = p.f64(scale_f.value);
    const double sy = p.f64(scale_f.value + 8);
    if (std::abs(sx - sy) > 1e-12)
        throw std::runtime_error("tiff: non-square cells unsupported: " + path);
    const double tie_lon = p.f64(tie_f.value + 3 * 8);
    const double tie_lat = p.f64(tie_f.value + 4 * 8);

    Raster out;
    out.spec.n_rows = int(height);
    out.spec.n_cols = int(width);
    out.spec.cell_deg = sx;
    out.spec.origin_lat = tie_lat;
    out.spec.origin_lon = tie_lon;
    out.spec.validate();
    out.values.resize(out.spec.size());

    if (fields.count(tiff::kTagImageDescription)) {
        const Field& fd = get(tiff::kTagImageDescription);
        const std::size_t base = fd.count <= 4 ? fd.value_off : fd.value;
        std::string s;
        for (std::uint32_t i = 0; i < fd.count; ++i) {
            const char ch = char(p.bytes.at(base + i));
            if (ch == '\0') break;
            s.push_back(ch);
        }
        out.unit = s;
    }

    double nodata = kMissing;
    bool have_nodata = false;
    if (fields.count(tiff::kTagGdalNodata)) {
        const Field& fd = get(tiff::kTagGdalNodata);
        const std::size_t base = fd.count <= 4 ? fd.value_off : fd.value;
        std::string s;
        for (std::uint32_t i = 0; i < fd.count; ++i) {
            const char ch = char(p.bytes.at(base + i));
            if (ch == '\0') break;
            s.push_back(ch);
        }
        if (!s.empty()) {
            nodata = std::strtod(s.c_str(), nullptr);
            have_nodata = true;
        }
    }

    const auto offsets = int_array(get(tiff::kTagStripOffsets));
    const auto counts = int_array(get(tiff::kTagStripByteCounts));
    if (offsets.size() != counts.size())
        throw std::runtime_error("tiff: strip table mismatch: " + path);
    std::size_t pixel = 0;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
        const std::size_t n = counts[s] / 4;
        for (std::size_t i = 0; i < n && pixel < out.values.size(); ++i, ++pixel) {
            const std::uint32_t bits = p.u32(offsets[s] + 4 * i);
            float fv;
            std::memcpy(&fv, &bits, 4);
            double v = double(fv);
            if (have_nodata && !std::isnan(nodata) && v == nodata) v = kMissing;
            out.values[pixel] = v;
        }
    }
    if (pixel != out.values.size())
        throw std::runtime_error("tiff: pixel data truncated: " + path);
    return out;
}

} // namespace fertgrid
