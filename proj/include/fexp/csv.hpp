#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "fexp/diffcore.hpp"

namespace fexp::csv {

std::string cell(double v);
std::string cell(int v);
std::string cell(std::size_t v);

// Comma-delimited writer with a mandatory header row.
class Writer {
  public:
    Writer(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);

  private:
    std::ofstream os_;
    std::size_t columns_;
};

// Matrix of doubles with header x1..xd.
void write_matrix(const std::string& path, const diffcore::Tensor& m);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;  // FormatError if absent
};

// Parses a numeric CSV (header row mandatory). Non-numeric cells become NaN.
Table read_table(const std::string& path);

// Reads the x1..xd columns of a table into an n x d tensor.
diffcore::Tensor read_matrix(const std::string& path);

}  // namespace fexp::csv
