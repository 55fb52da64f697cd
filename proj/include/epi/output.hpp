#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "epi/config.hpp"
#include "epi/error.hpp"

namespace epi {

inline constexpr const char* kVersion = "0.1.0";

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

/// Line-oriented CSV file. Doubles are written with 17 significant digits.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        out_ << header << '\n';
    }

    template <class... Ts>
    void row(const Ts&... values) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
        out_ << '\n';
        if (!out_) throw IoError("write failed on " + path_.string());
    }

    void close() {
        out_.close();
        if (out_.fail()) throw IoError("write failed on " + path_.string());
    }

private:
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    template <class T>
        requires std::is_integral_v<T>
    static std::string cell(T v) {
        return std::to_string(v);
    }

    std::filesystem::path path_;
    std::ofstream out_;
};

/// Config echo plus informational "run." entries; reading the document back
/// with parse_config reproduces the run.
struct RunManifest {
    ExperimentConfig config;
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value) { entries.emplace_back("run." + key, value); }
    void add(const std::string& key, double value) { add(key, fmt17(value)); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, long long value) { add(key, std::to_string(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }

    std::string to_text() const {
        std::string s = config.to_text();
        for (const auto& [k, v] : entries) s += k + " = " + v + "\n";
        return s;
    }

    void write(const std::filesystem::path& dir) const {
        ensure_directory(dir);
        const auto path = dir / "manifest.txt";
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out << to_text();
        out.close();
        if (out.fail()) throw IoError("write failed on " + path.string());
    }
};

/// Numeric CSV with a header row; rows are returned as parsed doubles and
/// empty cells read as NaN.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw InputError("missing column " + name);
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(detail::trim(cell));
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            if (detail::trim(cell).empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            try {
                row.push_back(detail::to_double("cell", detail::trim(cell)));
            } catch (const ConfigError&) {
                throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.header.size())
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace epi
