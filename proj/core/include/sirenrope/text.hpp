#pragma once

// Number formatting and strict parsing shared by the text formats.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sirenrope {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Whole-string parses; throw std::invalid_argument naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);
std::size_t parse_size(std::string_view text, std::string_view what);
/// true/false/1/0/yes/no/on/off
bool parse_bool(std::string_view text, std::string_view what);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace sirenrope
