#include "kylelab/csv.hpp"

#include <cstdio>

namespace kylelab {

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void CsvWriter::sep() {
  if (!first_) os_ << ',';
  first_ = false;
}

void CsvWriter::header(const std::vector<std::string>& cols) {
  for (const auto& c : cols) *this << c;
  end_row();
}

CsvWriter& CsvWriter::operator<<(double v) {
  sep();
  os_ << csv_number(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  sep();
  os_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& s) {
  sep();
  os_ << s;
  return *this;
}

CsvWriter& CsvWriter::values(std::span<const double> v) {
  for (double x : v) *this << x;
  return *this;
}

void CsvWriter::end_row() {
  os_ << '\n';
  first_ = true;
}

}  // namespace kylelab
