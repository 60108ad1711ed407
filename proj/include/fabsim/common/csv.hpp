#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "fabsim/errors.hpp"

namespace fabsim {

// Minimal CSV writer. Numbers are printed with enough digits to
// round-trip a double so repeated runs produce byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw ConfigurationError("cannot write file: " + path);
    out_.precision(17);
  }

  void header(std::initializer_list<std::string> cols) {
    bool first = true;
    for (const auto& c : cols) {
      if (!first) out_ << ",";
      out_ << c;
      first = false;
    }
    out_ << "\n";
  }

  template <typename... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((write_cell(vals, first), first = false), ...);
    out_ << "\n";
  }

 private:
  template <typename T>
  void write_cell(const T& v, bool first) {
    if (!first) out_ << ",";
    out_ << v;
  }

  std::ofstream out_;
};

}  // namespace fabsim
