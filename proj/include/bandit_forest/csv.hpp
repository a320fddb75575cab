#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace bandit_forest {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number in the file for each row, for error messages.
  std::vector<std::size_t> line_numbers;

  // Index of a header column, or -1.
  int column(const std::string& name) const;
};

// Reads a comma-separated file with a header row.  Handles double-quoted
// fields; lines starting with '#' are skipped.
CsvTable read_csv(const std::string& path);

// Shortest text that parses back to the same double.
std::string format_double(double value);

// Parses a full cell as a double; returns false on trailing junk or empty input.
bool parse_double(const std::string& text, double& out);

// Writes "# schema: <schema>" followed by the header, then rows as they come.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& cells);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::size_t width_;
};

}  // namespace bandit_forest
