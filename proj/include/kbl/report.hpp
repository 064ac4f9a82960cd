#pragma once

// Report files: JSON (schema 1) and CSV tables, both written atomically
// (temporary file in the target directory, then rename).

#include "json.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace kbl {

using json = nlohmann::ordered_json;

inline constexpr int report_schema = 1;

using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::string name;  ///< file stem
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

/// %.17g for doubles; nan and inf spelled out.
std::string format_double(double x);

std::string to_csv(const Table& t);

/// Non-finite doubles become null so the output is valid JSON.
json finite_or_null(double x);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Pretty-printed with two-space indent and a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);

void write_csv(const std::filesystem::path& dir, const Table& t);

} // namespace kbl
