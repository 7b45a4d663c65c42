// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gta {

// Tab-separated log: "# key=value" header lines, one column-name line, then
// rows. Missing values are written as "-".
struct MetricsTable {
    std::map<std::string, std::string> header;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column_index(const std::string& name) const;  // throws DataError if absent
    // Rows whose "kind" column equals `kind`, projected on `name`, parsed as doubles.
    [[nodiscard]] std::vector<double> numeric(const std::string& name, const std::string& kind) const;
};

MetricsTable read_metrics_table(const std::filesystem::path& path);

// Drops data rows whose "step" column exceeds max_step; header lines are kept.
void truncate_log_after(const std::filesystem::path& path, std::int64_t max_step);

// First step at which the trailing mean over `window` consecutive values
// reaches `threshold`; nullopt when it never does.
std::optional<std::int64_t> steps_to_threshold(std::span<const double> steps, std::span<const double> values,
                                               double threshold, int window);

}  // namespace gta
