#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace limbguard::numio {

// Shortest decimal form that parses back to the identical double. All file
// formats go through these two functions so output is locale-independent and
// round-trips bit-exactly.
std::string format(double v);
void append(std::string& out, double v);

// Strict parsers: the whole token must be consumed, non-finite values are
// rejected. A single leading '+' is tolerated.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

}  // namespace limbguard::numio
