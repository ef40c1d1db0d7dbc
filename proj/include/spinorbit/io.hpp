// io.hpp - CSV tables with shortest round-trip floats, atomic file writes, config hashing

#pragma once

#include "spinorbit/classical.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace spinorbit::io {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

struct CsvValue {
    std::string text;
    CsvValue(double v) : text(format_double(v)) {}
    CsvValue(int v) : text(std::to_string(v)) {}
    CsvValue(long v) : text(std::to_string(v)) {}
    CsvValue(long long v) : text(std::to_string(v)) {}
    CsvValue(unsigned long v) : text(std::to_string(v)) {}
    CsvValue(bool v) : text(v ? "1" : "0") {}
    CsvValue(const char* v) : text(v) {}
    CsvValue(std::string v) : text(std::move(v)) {}
};

class CsvTable {
public:
    CsvTable() = default;
    CsvTable(std::string name, std::vector<std::string> header) : name_(std::move(name)), header_(std::move(header)) {}

    void add_row(std::initializer_list<CsvValue> values) { add_row(std::vector<CsvValue>(values)); }

    void add_row(const std::vector<CsvValue>& values) {
        if (values.size() != header_.size()) throw std::invalid_argument("CsvTable::add_row: column count mismatch");
        std::vector<std::string> row;
        row.reserve(values.size());
        for (const auto& v : values) row.push_back(v.text);
        rows_.push_back(std::move(row));
    }

    std::string str() const {
        std::ostringstream out;
        write_line(out, header_);
        for (const auto& r : rows_) write_line(out, r);
        return out.str();
    }

    const std::string& name() const { return name_; }
    const std::vector<std::string>& header() const { return header_; }
    std::size_t size() const { return rows_.size(); }
    const std::vector<std::string>& row(std::size_t i) const { return rows_.at(i); }

private:
    static void write_line(std::ostringstream& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
            if (quote) {
                out << '"';
                for (char ch : cells[i]) out << (ch == '"' ? std::string("\"\"") : std::string(1, ch));
                out << '"';
            } else {
                out << cells[i];
            }
        }
        out << '\n';
    }

    std::string name_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Writes to a temporary sibling and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("write_atomic: cannot open " + tmp.string());
        f << content;
        f.flush();
        if (!f) {
            f.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("write_atomic: write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Trajectory export: t, q.., p.., n1, n2, n3, S, alpha.
inline CsvTable trajectory_table(const SemiclassicalTrajectory& traj) {
    std::vector<std::string> header{"t"};
    const int d = traj.z.empty() ? 1 : traj.z.front().dim();
    for (int j = 0; j < d; ++j) header.push_back(d == 1 ? "q" : "q" + std::to_string(j + 1));
    for (int j = 0; j < d; ++j) header.push_back(d == 1 ? "p" : "p" + std::to_string(j + 1));
    for (const char* h : {"n1", "n2", "n3", "S", "alpha"}) header.emplace_back(h);
    CsvTable t("trajectory", header);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        std::vector<CsvValue> row{traj.t[i]};
        for (int j = 0; j < d; ++j) row.emplace_back(traj.z[i].q(j));
        for (int j = 0; j < d; ++j) row.emplace_back(traj.z[i].p(j));
        for (int k = 0; k < 3; ++k) row.emplace_back(traj.n[i][k]);
        row.emplace_back(traj.S[i]);
        row.emplace_back(traj.alpha[i]);
        t.add_row(row);
    }
    return t;
}

}  // namespace spinorbit::io
