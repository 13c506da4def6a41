#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace psmrwm {

/// Fixed "%.12g" rendering so that re-runs produce byte-identical files.
std::string csv_num(double x);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace psmrwm
