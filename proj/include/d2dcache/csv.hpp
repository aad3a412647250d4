#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "d2dcache/matrix.hpp"

namespace d2dcache::csv {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Empty string for nullopt.
std::string format_optional(const std::optional<double>& value);

std::vector<std::string> split_line(std::string_view line);

double parse_double(std::string_view field);

/// Writes `header` then one row per matrix row.
void write_matrix(std::ostream& out, const std::vector<std::string>& header,
                  const Matrix& m);

/// Reads a numeric matrix preceded by one header line.
Matrix read_matrix(std::istream& in, std::vector<std::string>* header = nullptr);

}  // namespace d2dcache::csv
