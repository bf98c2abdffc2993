#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data or format error, 3 numerical abort.

#include "priorseg/state.hpp"

#include <iosfwd>
#include <vector>

namespace priorseg {

inline constexpr const char* kVersion = "0.1.0";

/// CSV with header `iter,f1,f2,f3,f4,total`, 17 significant digits.
void write_trace_csv(const std::vector<EnergyBreakdown>& trace, std::ostream& out);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

} // namespace priorseg
