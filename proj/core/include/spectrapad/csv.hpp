#pragma once

#include <string>
#include <vector>

namespace spectrapad {

/// Quotes the field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

/// RFC-4180-ish: double-quoted fields with "" escapes; CRLF tolerated.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

}  // namespace spectrapad
