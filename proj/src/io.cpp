#include "tvtp/io.hpp"

#include "tvtp/errors.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace tvtp {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_cell(int line, const std::string& column, const std::string& text, const char* what) {
  std::ostringstream os;
  os << "row " << line << ", column '" << column << "': " << what << " '" << text << "'";
  throw InputError(os.str());
}

template <typename T>
T parse_cell(const std::string& raw, int line, const std::string& column) {
  const std::string text = trim(raw);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) bad_cell(line, column, text, "cannot parse");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) bad_cell(line, column, text, "non-finite value");
  }
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("empty data file");
  std::vector<std::string> header = split(line);
  for (auto& h : header) h = trim(h);
  const bool with_states = header.size() == 4 && header[3] == "s_true";
  if (header.size() < 3 || header[0] != "t" || header[1] != "y" || header[2] != "z" ||
      (header.size() == 4 && !with_states) || header.size() > 4)
    throw InputError("row 1: header must be \"t,y,z\" or \"t,y,z,s_true\", got \"" + trim(line) + "\"");

  Dataset d;
  std::vector<int> states;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      std::ostringstream os;
      os << "row " << line_no << ": expected " << header.size() << " columns, found " << cells.size();
      throw InputError(os.str());
    }
    const long t = parse_cell<long>(cells[0], line_no, "t");
    if (t != d.length()) {
      std::ostringstream os;
      os << "row " << line_no << ", column 't': expected " << d.length() << ", found " << t;
      throw InputError(os.str());
    }
    d.y.push_back(parse_cell<double>(cells[1], line_no, "y"));
    d.z.push_back(parse_cell<double>(cells[2], line_no, "z"));
    if (with_states) {
      const int s = parse_cell<int>(cells[3], line_no, "s_true");
      if (s < 0) bad_cell(line_no, "s_true", trim(cells[3]), "negative regime");
      states.push_back(s);
    }
  }
  if (d.length() == 0) throw InputError("data file has a header but no rows");
  if (with_states) d.s_true = std::move(states);
  return d;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open data file '" + path + "'");
  try {
    return read_csv(f);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_csv(std::ostream& os, const Dataset& data) {
  if (data.z.size() != data.y.size() || (data.s_true && data.s_true->size() != data.y.size()))
    throw DomainError("dataset columns have different lengths");
  os << (data.s_true ? "t,y,z,s_true\n" : "t,y,z\n");
  for (int t = 0; t < data.length(); ++t) {
    os << t << ',' << format_double(data.y[t]) << ',' << format_double(data.z[t]);
    if (data.s_true) os << ',' << (*data.s_true)[t];
    os << '\n';
  }
}

void write_csv_file(const std::string& path, const Dataset& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  write_csv(f, data);
  if (!f) throw InputError("error writing '" + path + "'");
}

}  // namespace tvtp
