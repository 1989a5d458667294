#include "clickbait/csv.hpp"

#include "clickbait/error.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace clickbait::csv {

std::string escape(std::string_view field) {
    bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quotes) {
        return std::string(field);
    }
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) {
            out << ',';
        }
        out << escape(row[i]);
    }
    out << '\n';
}

std::optional<Row> read_row(std::istream& in, std::size_t& line) {
    std::string text;
    if (!std::getline(in, text)) {
        return std::nullopt;
    }
    ++line;
    const std::size_t start_line = line;

    Row row;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i == text.size()) {
            if (!quoted) {
                break;
            }
            std::string next;
            if (!std::getline(in, next)) {
                throw ParseError("unterminated quoted field", start_line);
            }
            ++line;
            field.push_back('\n');
            text = std::move(next);
            i = 0;
            continue;
        }
        char c = text[i++];
        if (quoted) {
            if (c == '"') {
                if (i < text.size() && text[i] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' && i == text.size()) {
            // CRLF line ending
        } else {
            field.push_back(c);
        }
    }
    row.push_back(std::move(field));
    return row;
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    while (!text.empty() && text.front() == ' ') {
        text.remove_prefix(1);
    }
    if (text == "inf") {
        return HUGE_VAL;
    }
    if (text == "-inf") {
        return -HUGE_VAL;
    }
    double v = 0.0;
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw Error("not a number: '" + std::string(text) + "'");
    }
    return v;
}

} // namespace clickbait::csv
