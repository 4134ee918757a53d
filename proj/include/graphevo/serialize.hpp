#pragma once

#include <string>
#include <string_view>

namespace graphevo {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Strict parse of a complete token. Throws DataError quoting the text.
double parse_double(std::string_view s);

} // namespace graphevo
