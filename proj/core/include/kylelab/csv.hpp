#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kylelab {

// 12 significant digits, the precision used by every CSV the library writes.
std::string csv_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void header(const std::vector<std::string>& cols);
  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
  CsvWriter& operator<<(const std::string& s);
  CsvWriter& values(std::span<const double> v);
  void end_row();

 private:
  void sep();
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace kylelab
