#pragma once

#include <freestop/types.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace freestop {

// Round-trip formatting: 17 significant digits, "inf"/"-inf"/"nan" literals.
std::string format_double(double v);

// Headered CSV writer. Rows are buffered and flushed on close() so a failed
// run never leaves a truncated file behind.
class CsvWriter {
 public:
  CsvWriter(std::string path, const std::vector<std::string>& header);

  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(const std::string& v);
  CsvWriter& cells(const Vector& v);
  void end_row();
  void close();

 private:
  std::string path_;
  std::string buffer_;
  bool row_open_ = false;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// Numeric CSV with a header line; "inf", "-inf" and "nan" are accepted.
CsvTable read_csv(const std::string& path);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

// JSON scalars: numbers at 17 significant digits (null when not finite) and
// escaped strings.
std::string json_number(double v);
std::string json_string(const std::string& s);

// "q" for one dimension, "q0", "q1", ... otherwise.
std::vector<std::string> axis_names(const std::string& stem, int dimension);

}  // namespace freestop
