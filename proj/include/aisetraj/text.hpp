#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aisetraj {

// Shortest decimal form that round-trips, independent of locale.
std::string format_double(double v);

// Whole-string parse; surrounding spaces allowed.
bool parse_double(std::string_view s, double& out);

// Splits on commas and trims spaces. No quoting support.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace aisetraj
