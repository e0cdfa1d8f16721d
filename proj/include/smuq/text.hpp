#pragma once
#include <string>
#include <string_view>
#include <vector>

namespace smuq {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
/// Strict parse of the whole field; throws ErrorKind::parse naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line, char sep);

}  // namespace smuq
