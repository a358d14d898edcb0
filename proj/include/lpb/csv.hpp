#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lpb/error.hpp"

namespace lpb {

/// Shortest exact decimal form of a double (round-trips bit-exactly).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    // Try shorter representations for readability.
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[40];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

/// RFC-4180 CSV writer: CRLF records, quoting only where required.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot open for writing: " + path);
    path_ = path;
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << escape(cells[i]);
    }
    os_ << "\r\n";
  }

  void close() {
    os_.close();
    if (!os_) throw IoError("write failed: " + path_);
  }

  static std::string escape(const std::string& cell) {
    bool needs_quote = false;
    for (char c : cell) {
      if (c == ',' || c == '"' || c == '\n' || c == '\r') {
        needs_quote = true;
        break;
      }
    }
    if (!needs_quote) return cell;
    std::string out = "\"";
    for (char c : cell) {
      if (c == '"') out += "\"\"";
      else out += c;
    }
    out += '"';
    return out;
  }

 private:
  std::ofstream os_;
  std::string path_;
};

}  // namespace lpb
