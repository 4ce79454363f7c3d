#pragma once

// Deterministic CSV emission. Every file starts with a '#' metadata line
// (command, config hash, seed, tool version) so a result can be traced
// back to the exact invocation that produced it.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dempc {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& command, std::uint64_t config_hash,
              std::uint64_t seed)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        char meta[160];
        std::snprintf(meta, sizeof(meta), "# command=%s config=%016llx seed=%llu version=%s\n",
                      command.c_str(), static_cast<unsigned long long>(config_hash),
                      static_cast<unsigned long long>(seed), kToolVersion);
        out_ << meta;
    }

    void header(const std::vector<std::string>& columns) { write_row(columns); }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        write_row(cells);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

}  // namespace dempc
