#include "cbesq/path_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "cbesq/error.hpp"

namespace cbesq::io {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("csv line " + std::to_string(line) + ": cannot parse number '" + s + "'");
    }
    return v;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    if (ec != std::errc()) throw ConfigError("cannot format number");
    return std::string(buf, ptr);
}

void write_path_csv(std::ostream& out, const ComplexPath& path) {
    out << "t,re,im\n";
    for (std::size_t k = 0; k < path.size(); ++k) {
        out << format_double(path.grid[k]) << ',' << format_double(path[k].real()) << ','
            << format_double(path[k].imag()) << '\n';
    }
}

void write_long_header(std::ostream& out) { out << "path_id,t,re,im\n"; }

void write_path_rows(std::ostream& out, std::uint64_t path_id, const ComplexPath& path) {
    for (std::size_t k = 0; k < path.size(); ++k) {
        out << path_id << ',' << format_double(path.grid[k]) << ',' << format_double(path[k].real()) << ','
            << format_double(path[k].imag()) << '\n';
    }
}

ComplexPath read_path_csv(std::istream& in, std::optional<std::uint64_t> path_id) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("path csv: empty input");
    const auto header = split(line);
    bool long_format = false;
    if (header == std::vector<std::string>{"path_id", "t", "re", "im"}) {
        long_format = true;
    } else if (header != std::vector<std::string>{"t", "re", "im"}) {
        throw ConfigError("path csv: expected header 't,re,im' or 'path_id,t,re,im'");
    }
    std::vector<double> t;
    std::vector<complex> v;
    std::optional<std::uint64_t> selected = path_id;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        const std::size_t off = long_format ? 1 : 0;
        if (cells.size() != 3 + off) throw ConfigError("path csv line " + std::to_string(lineno) + ": wrong column count");
        if (long_format) {
            const auto id = static_cast<std::uint64_t>(parse_double(cells[0], lineno));
            if (!selected) selected = id;
            if (id != *selected) {
                if (!t.empty() && !path_id) break;
                continue;
            }
        }
        t.push_back(parse_double(cells[off], lineno));
        v.emplace_back(parse_double(cells[off + 1], lineno), parse_double(cells[off + 2], lineno));
    }
    if (t.empty()) throw ConfigError("path csv: no rows for the requested path");
    return ComplexPath(TimeGrid::from_nodes(std::move(t)), std::move(v));
}

void write_control_csv(std::ostream& out, const Control& h) {
    out << "t,h,hdot\n";
    const auto& grid = h.grid();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double rate = h.rate(std::min(k, grid.intervals() - 1));
        out << format_double(grid[k]) << ',' << format_double(h.value(k)) << ',' << format_double(rate) << '\n';
    }
}

Control read_control_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("control csv: empty input");
    if (split(line) != std::vector<std::string>{"t", "h", "hdot"}) {
        throw ConfigError("control csv: expected header 't,h,hdot'");
    }
    std::vector<double> t, rate;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != 3) throw ConfigError("control csv line " + std::to_string(lineno) + ": wrong column count");
        t.push_back(parse_double(cells[0], lineno));
        rate.push_back(parse_double(cells[2], lineno));
    }
    if (t.size() < 3) throw ConfigError("control csv: too few rows");
    rate.pop_back();
    return Control(TimeGrid::from_nodes(std::move(t)), std::move(rate));
}

}  // namespace cbesq::io
