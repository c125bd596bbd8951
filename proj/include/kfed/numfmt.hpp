#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kfed {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Strict parse of a whole token; throws InputError on junk.
double parse_double(std::string_view token);
long parse_long(std::string_view token);

/// Comma-separated list of doubles, e.g. "0,25,50".
std::vector<double> parse_double_list(std::string_view text);
std::string format_double_list(const std::vector<double>& values, char sep = ',');

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace kfed
