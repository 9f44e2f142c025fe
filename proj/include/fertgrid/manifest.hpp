#pragma once
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fertgrid {

// FNV-1a 64-bit over raw bytes; fast, dependency-free, and stable across
// platforms, which is all the reproducibility manifest needs.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("manifest: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return fnv1a64(buf.str());
}

struct ManifestEntry {
    std::string path; // relative to the output directory
    std::uint64_t bytes = 0;
    std::uint64_t checksum = 0;
};

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// One line per artifact, sorted by path: "fnv1a64 <hex> <bytes> <path>".
inline void write_manifest(const std::string& path, std::vector<ManifestEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.path < b.path; });
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    for (const auto& e : entries)
        out << "fnv1a64 " << hex64(e.checksum) << " " << e.bytes << " " << e.path << "\n";
    if (!out) throw std::runtime_error("manifest write failed: " + path);
}

} // namespace fertgrid
