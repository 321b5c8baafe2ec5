#pragma once

#include "pbelab/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace pbelab {

// Streaming JSON writer with insertion-ordered keys and 17-significant-digit
// numbers, so equal inputs produce byte-identical reports. Non-finite values
// are written as the quoted strings "nan" / "inf" / "-inf" to stay parseable.
class StructuredWriter {
 public:
  StructuredWriter& begin_object() {
    separate();
    out_ += '{';
    fresh_.push_back(true);
    return *this;
  }
  StructuredWriter& end_object() {
    out_ += '}';
    fresh_.pop_back();
    return *this;
  }
  StructuredWriter& begin_array() {
    separate();
    out_ += '[';
    fresh_.push_back(true);
    return *this;
  }
  StructuredWriter& end_array() {
    out_ += ']';
    fresh_.pop_back();
    return *this;
  }
  StructuredWriter& key(const std::string& name) {
    separate();
    append_string(name);
    out_ += ':';
    pending_value_ = true;
    return *this;
  }
  StructuredWriter& value(double x) {
    separate();
    if (std::isnan(x)) {
      append_string("nan");
    } else if (std::isinf(x)) {
      append_string(x > 0 ? "inf" : "-inf");
    } else {
      out_ += format_real(x);
    }
    return *this;
  }
  StructuredWriter& value(long x) {
    separate();
    out_ += std::to_string(x);
    return *this;
  }
  StructuredWriter& value(int x) { return value(static_cast<long>(x)); }
  StructuredWriter& value(size_t x) {
    separate();
    out_ += std::to_string(x);
    return *this;
  }
  StructuredWriter& value(bool x) {
    separate();
    out_ += x ? "true" : "false";
    return *this;
  }
  StructuredWriter& value(const char* s) { return value(std::string(s)); }
  StructuredWriter& value(const std::string& s) {
    separate();
    append_string(s);
    return *this;
  }
  StructuredWriter& value(const Vector& v) {
    begin_array();
    for (Eigen::Index i = 0; i < v.size(); ++i) value(v(i));
    return end_array();
  }
  StructuredWriter& value(const Matrix& m) {
    begin_array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) value(Vector(m.row(r).transpose()));
    return end_array();
  }
  template <typename T>
  StructuredWriter& field(const std::string& name, const T& v) {
    key(name);
    return value(v);
  }

  std::string str() const { return out_ + "\n"; }

 private:
  void separate() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!fresh_.empty()) {
      if (!fresh_.back()) out_ += ',';
      fresh_.back() = false;
    }
  }
  void append_string(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  std::vector<bool> fresh_;  // per open container: no element written yet
  bool pending_value_ = false;
};

// Comma-separated table with the same number formatting as the structured
// writer. Cells containing commas or quotes are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    append_row(header);
    columns_ = header.size();
  }
  void row(const std::vector<std::string>& cells) {
    require(cells.size() == columns_, "CsvWriter: row width mismatch");
    append_row(cells);
  }
  void row(const std::vector<double>& cells) {
    std::vector<std::string> formatted;
    formatted.reserve(cells.size());
    for (double x : cells) formatted.push_back(format_real(x));
    row(formatted);
  }
  const std::string& str() const { return out_; }

 private:
  void append_row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      if (cells[i].find_first_of(",\"\n") != std::string::npos) {
        out_ += '"';
        for (char c : cells[i]) {
          if (c == '"') out_ += '"';
          out_ += c;
        }
        out_ += '"';
      } else {
        out_ += cells[i];
      }
    }
    out_ += '\n';
  }

  std::string out_;
  size_t columns_ = 0;
};

}  // namespace pbelab
