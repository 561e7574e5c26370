#pragma once

// Dataset CSV format: header "t,y,z" or "t,y,z,s_true", one row per time
// index t = 0..T in order, '.' decimal separator, values written with 17
// significant digits so a write/read round trip is exact.

#include "tvtp/filter.hpp"

#include <iosfwd>
#include <string>

namespace tvtp {

// Throws InputError naming the row (1-based line number) and column.
Dataset read_csv(std::istream& is);
Dataset read_csv_file(const std::string& path);

void write_csv(std::ostream& os, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);

// Locale-independent %.17g.
std::string format_double(double v);

}  // namespace tvtp
