#pragma once

#include "hsq/fem1d.hpp"
#include "hsq/sparse_quad.hpp"

#include <string>
#include <vector>

namespace hsq {

// Shortest-exact ("%.17g") rendering used for every numeric CSV cell.
std::string format_double(double x, int digits = 17);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws if missing
  double number(std::size_t row, const std::string& name) const;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);
std::string render_csv(const CsvTable& table);

// x,value
void write_field_csv(const std::string& path, const Vec& x, const Vec& values);
// j,sqrt_lambda
void write_spectrum_csv(const std::string& path, const Vec& eigenvalues);
// step,chosen_index,indicator,n_indices,n_points,value_0,...
CsvTable trace_table(const std::vector<TraceRecord>& trace);

void ensure_directory(const std::string& dir);

}  // namespace hsq
