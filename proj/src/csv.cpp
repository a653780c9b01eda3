#include "fexp/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "fexp/errors.hpp"

namespace fexp::csv {

std::string cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string cell(int v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }

Writer::Writer(const std::string& path, const std::vector<std::string>& header)
    : os_(path), columns_(header.size()) {
    if (!os_) throw FormatError("csv: cannot open " + path + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << "\n";
}

void Writer::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw FormatError("csv: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
}

void write_matrix(const std::string& path, const diffcore::Tensor& m) {
    std::vector<std::string> header;
    for (std::size_t c = 1; c <= m.cols(); ++c) header.push_back("x" + std::to_string(c));
    Writer w(path, header);
    std::vector<std::string> cells(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t c = 0; c < m.cols(); ++c) cells[c] = cell(m.at(i, c));
        w.row(cells);
    }
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw FormatError("csv: missing column " + name);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Table read_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("csv: cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw FormatError("csv: empty file " + path);
    t.header = split_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw FormatError("csv: ragged row in " + path);
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                row[i] = std::stod(cells[i]);
            } catch (...) {
                row[i] = std::nan("");
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

diffcore::Tensor read_matrix(const std::string& path) {
    const Table t = read_table(path);
    std::vector<std::size_t> cols;
    for (std::size_t c = 1;; ++c) {
        bool found = false;
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == "x" + std::to_string(c)) {
                cols.push_back(i);
                found = true;
                break;
            }
        if (!found) break;
    }
    if (cols.empty()) throw FormatError("csv: no x1..xd columns in " + path);
    if (t.rows.empty()) throw FormatError("csv: no data rows in " + path);
    diffcore::Tensor m = diffcore::Tensor::zeros({t.rows.size(), cols.size()});
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t c = 0; c < cols.size(); ++c) m.at(i, c) = t.rows[i][cols[c]];
    return m;
}

}  // namespace fexp::csv
