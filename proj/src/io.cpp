#include "hsq/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hsq {

std::string format_double(double x, int digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw std::out_of_range("csv: no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(static_cast<std::size_t>(column(name))));
}

namespace {

// Cells never contain commas except multi-index labels, which get quoted.
std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

std::string render_csv(const CsvTable& table) {
  std::ostringstream os;
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << quote(cells[i]);
    }
    os << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return os.str();
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
      if (t.rows.back().size() != t.header.size()) {
        throw std::invalid_argument("csv: row " + std::to_string(t.rows.size()) + " has " +
                                    std::to_string(t.rows.back().size()) + " cells, header has " +
                                    std::to_string(t.header.size()));
      }
    }
  }
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << render_csv(table);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str());
}

void write_field_csv(const std::string& path, const Vec& x, const Vec& values) {
  if (x.size() != values.size()) throw std::invalid_argument("field csv: size mismatch");
  CsvTable t;
  t.header = {"x", "value"};
  for (int i = 0; i < x.size(); ++i) t.rows.push_back({format_double(x(i)), format_double(values(i))});
  write_csv(path, t);
}

void write_spectrum_csv(const std::string& path, const Vec& eigenvalues) {
  CsvTable t;
  t.header = {"j", "sqrt_lambda"};
  for (int j = 0; j < eigenvalues.size(); ++j) {
    t.rows.push_back({std::to_string(j + 1), format_double(std::sqrt(std::max(0.0, eigenvalues(j))))});
  }
  write_csv(path, t);
}

CsvTable trace_table(const std::vector<TraceRecord>& trace) {
  CsvTable t;
  t.header = {"step", "chosen_index", "indicator", "n_indices", "n_points"};
  const std::size_t nv = trace.empty() ? 0 : trace.front().value.size();
  for (std::size_t i = 0; i < nv; ++i) t.header.push_back("value_" + std::to_string(i));
  for (const auto& r : trace) {
    std::vector<std::string> row = {std::to_string(r.step), r.chosen.to_string(),
                                    format_double(r.indicator), std::to_string(r.n_indices),
                                    std::to_string(r.n_points)};
    for (double v : r.value) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace hsq
