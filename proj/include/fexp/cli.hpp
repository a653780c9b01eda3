#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fexp::cli {

// Entry point shared by the fexp binary and the in-process CLI tests.
// Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
// 3 oracle acceptance-check failure.
int run(const std::vector<std::string>& args);

// Fixed-width histogram over [lo, hi]; values outside are clamped into the
// boundary bins. Bin counts always sum to values.size().
std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins, double lo,
                                   double hi);

}  // namespace fexp::cli
