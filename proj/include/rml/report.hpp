#pragma once

// Tabular output, minimal SVG plots and run manifests.

#include "rml/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rml::report {

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

// Floats at 9 significant digits; NaN as "nan".
std::string format_number(double v);
std::string to_csv(const Table& t);
// Matrix rows with columns named prefix0, prefix1, ...
Table matrix_table(const Matrix& m, const std::string& prefix = "x");

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool points = false;  // scatter markers instead of polylines
    bool log_x = false;
};

std::string to_svg(const Plot& p);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Writes `contents` to path (creating parents) and returns its checksum.
std::uint64_t write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rml::report
