#pragma once

// Minimal RFC 4180 reader/writer used for corpus, feature and report files.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace clickbait::csv {

using Row = std::vector<std::string>;

std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

/// Reads one record; quoted fields may span lines. Returns nullopt at EOF.
/// Throws ParseError on an unterminated quote.
std::optional<Row> read_row(std::istream& in, std::size_t& line);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view text);

} // namespace clickbait::csv
