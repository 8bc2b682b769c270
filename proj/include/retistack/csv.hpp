#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "retistack/error.hpp"

namespace retistack {
namespace csv {

// Minimal comma-separated support for the file formats of this project.
// Fields are identifiers and numbers; quoting is intentionally unsupported.

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::vector<std::vector<std::string>> read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail_validation("cannot open file: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

inline double parse_double(const std::string& s, const char* what) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        fail_validation(std::string("bad numeric field for ") + what + ": '" + s + "'");
    return value;
}

inline long parse_long(const std::string& s, const char* what) {
    long value = 0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        fail_validation(std::string("bad integer field for ") + what + ": '" + s + "'");
    return value;
}

// Probabilities and losses are written in scientific notation with 10
// significant digits so downstream files meet the >=9 digit contract
// regardless of magnitude.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9e", v);
    return buf;
}

// Shortest round-trip formatting for values that must restore exactly.
inline std::string format_double_exact(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

// Atomic write: stage into a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail_validation("cannot write file: " + tmp.string());
        out << contents;
        if (!out.flush()) fail_validation("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

} // namespace csv
} // namespace retistack
