#include "qsr/csv.hpp"

#include <charconv>
#include <stdexcept>

namespace qsr::csv {

std::string format_double(double value) {
  char buffer[40];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value,
                                    std::chars_format::general, 17);
  if (result.ec != std::errc{}) throw std::runtime_error("csv: number formatting failed");
  return std::string(buffer, result.ptr);
}

void append_row(std::string& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out.push_back(',');
    out += format_double(values[i]);
  }
  out.push_back('\n');
}

}  // namespace qsr::csv
