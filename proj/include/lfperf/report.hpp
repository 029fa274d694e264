// Tabular report emission (CSV or JSON). Numbers are written with nine
// significant digits, so identical inputs give byte-identical files.

#ifndef LFPERF_REPORT_HPP
#define LFPERF_REPORT_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lfperf::report {

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw std::invalid_argument("row has " + std::to_string(row.size()) +
                                        " cells, table has " + std::to_string(columns.size()) +
                                        " columns");
        rows.push_back(std::move(row));
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::out_of_range("no column '" + name + "'");
    }
};

enum class Format { Csv, Json };

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string csv_cell(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return format_number(*d);
    if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (auto u = std::get_if<std::uint64_t>(&c)) return std::to_string(*u);
    return csv_field(std::get<std::string>(c));
}

inline std::string json_cell(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return std::isfinite(*d) ? format_number(*d) : "null";
    if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (auto u = std::get_if<std::uint64_t>(&c)) return std::to_string(*u);
    return nlohmann::json(std::get<std::string>(c)).dump();
}

}  // namespace detail

inline void write_csv(const Table& t, std::ostream& os) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << detail::csv_field(t.columns[i]);
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::csv_cell(row[i]);
        os << '\n';
    }
}

/// Array of objects keyed by column name.
inline void write_json(const Table& t, std::ostream& os) {
    os << "[";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        os << (r ? ",\n " : "\n ") << "{";
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            os << (i ? ", " : "") << nlohmann::json(t.columns[i]).dump() << ": "
               << detail::json_cell(t.rows[r][i]);
        os << "}";
    }
    os << (t.rows.empty() ? "]\n" : "\n]\n");
}

inline void write(const Table& t, Format f, std::ostream& os) {
    f == Format::Csv ? write_csv(t, os) : write_json(t, os);
}

/// Writes to `destination`, or to stdout when it is empty or "-".
inline void emit_report(const Table& t, Format f, const std::string& destination) {
    if (destination.empty() || destination == "-") {
        write(t, f, std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(destination, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + destination + "' for writing");
    write(t, f, out);
    out.flush();
    if (!out) throw io_error("write to '" + destination + "' failed");
}

inline Format format_for(const std::string& name) {
    if (name == "csv") return Format::Csv;
    if (name == "json") return Format::Json;
    throw std::invalid_argument("unknown format '" + name + "'");
}

}  // namespace lfperf::report

#endif  // LFPERF_REPORT_HPP
