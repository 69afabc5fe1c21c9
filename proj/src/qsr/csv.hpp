#pragma once

#include <span>
#include <string>

namespace qsr::csv {

// Shortest text with 17 significant digits; locale-independent (std::to_chars).
std::string format_double(double value);

// Appends one CSV row (LF terminated).
void append_row(std::string& out, std::span<const double> values);

}  // namespace qsr::csv
