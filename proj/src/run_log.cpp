// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/run_log.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gta/errors.hpp"

namespace gta {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) {
            return out;
        }
        start = tab + 1;
    }
}

}  // namespace

std::size_t MetricsTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) {
            return i;
        }
    }
    throw DataError("metrics log has no column '" + name + "'");
}

std::vector<double> MetricsTable::numeric(const std::string& name, const std::string& kind) const {
    const std::size_t k = column_index("kind");
    const std::size_t c = column_index(name);
    std::vector<double> out;
    for (const auto& row : rows) {
        if (row[k] != kind) {
            continue;
        }
        out.push_back(row[c] == "-" ? std::numeric_limits<double>::quiet_NaN() : std::stod(row[c]));
    }
    return out;
}

MetricsTable read_metrics_table(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open metrics log " + path.string());
    }
    MetricsTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                t.header[line.substr(2, eq - 2)] = line.substr(eq + 1);
            }
            continue;
        }
        auto fields = split_tabs(line);
        if (t.columns.empty()) {
            t.columns = std::move(fields);
            continue;
        }
        if (fields.size() != t.columns.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
        }
        t.rows.push_back(std::move(fields));
    }
    if (t.columns.empty()) {
        throw DataError("metrics log " + path.string() + " has no column header");
    }
    return t;
}

void truncate_log_after(const std::filesystem::path& path, std::int64_t max_step) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream kept;
    std::string line;
    std::optional<std::size_t> step_col;
    while (std::getline(is, line)) {
        if (line.rfind("# ", 0) == 0 || line.empty()) {
            kept << line << '\n';
            continue;
        }
        const auto fields = split_tabs(line);
        if (!step_col) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "step") {
                    step_col = i;
                }
            }
            if (!step_col) {
                throw DataError(path.string() + ": no step column");
            }
            kept << line << '\n';
            continue;
        }
        if (std::stoll(fields.at(*step_col)) <= max_step) {
            kept << line << '\n';
        }
    }
    is.close();
    std::ofstream os(path, std::ios::trunc);
    os << kept.str();
    if (!os) {
        throw IoError("cannot rewrite " + path.string());
    }
}

std::optional<std::int64_t> steps_to_threshold(std::span<const double> steps, std::span<const double> values,
                                               double threshold, int window) {
    if (steps.size() != values.size() || window < 1) {
        throw InternalError("steps_to_threshold: bad arguments");
    }
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = w - 1; i < values.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = i + 1 - w; j <= i; ++j) {
            sum += values[j];
        }
        if (sum / static_cast<double>(w) >= threshold) {
            return static_cast<std::int64_t>(std::llround(steps[i]));
        }
    }
    return std::nullopt;
}

}  // namespace gta
