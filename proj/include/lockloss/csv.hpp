#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace lockloss {

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
std::string csv_field(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(static_cast<double>(v));
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    return std::string(v);
  }
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os) {
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }
  CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header) : os_(os) {
    bool first = true;
    for (auto h : header) {
      os_ << (first ? "" : ",") << h;
      first = false;
    }
    os_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((os_ << (first ? "" : ",") << csv_field(fields), first = false), ...);
    os_ << '\n';
  }

  void row(const std::vector<double>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os_ << (i ? "," : "") << format_double(fields[i]);
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace lockloss
