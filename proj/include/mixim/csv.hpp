#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mixim::csv {

using Row = std::vector<std::string>;

/// Parse RFC-4180 text: comma separated, optional double-quote quoting with ""
/// escapes, LF or CRLF record terminators. A trailing newline does not produce
/// an empty record.
std::vector<Row> parse(std::istream& in);
std::vector<Row> parse(std::string_view text);

/// Quote a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace mixim::csv
