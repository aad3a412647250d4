#include "d2dcache/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "d2dcache/error.hpp"

namespace d2dcache::csv {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error(ErrorCategory::internal, "to_chars failed");
  return std::string(buf.data(), end);
}

std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string{};
}

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view field) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (field == "inf") return INFINITY;
  if (field == "-inf") return -INFINITY;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw IoError("not a number: '" + std::string(field) + "'");
  return value;
}

void write_matrix(std::ostream& out, const std::vector<std::string>& header,
                  const Matrix& m) {
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c)
      out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in, std::vector<std::string>* header) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV input");
  auto head = split_line(line);
  std::size_t cols = head.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (fields.size() != cols)
      throw IoError("CSV row " + std::to_string(rows + 1) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(cols));
    for (const auto& f : fields) values.push_back(parse_double(f));
    ++rows;
  }
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  if (header) *header = std::move(head);
  return m;
}

}  // namespace d2dcache::csv
