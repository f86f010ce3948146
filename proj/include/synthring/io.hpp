#pragma once

// Output files: CSV tables (header row, 17 significant digits) and JSON
// sidecars.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthring/model.hpp"

namespace synthring {

using json = nlohmann::ordered_json;

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), f_(path, std::ios::binary) {
    if (!f_) throw Error("cannot write " + path.string());
    write_row(header);
  }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((f_ << (first ? "" : ",") << cell(values), first = false), ...);
    f_ << "\r\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) f_ << (i ? "," : "") << format_number(values[i]);
    f_ << "\r\n";
  }

  ~CsvWriter() noexcept(false) {
    f_.flush();
    if (!f_ && std::uncaught_exceptions() == 0) throw Error("write failed for " + path_.string());
  }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << quote(cells[i]);
    f_ << "\r\n";
  }

  static std::string cell(double v) { return format_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return quote(v); }
  static std::string cell(const char* v) { return quote(v); }

  static std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"') out += '"';
      out += ch;
    }
    return out + "\"";
  }

  std::filesystem::path path_;
  std::ofstream f_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed for " + path.string());
}

// 64-bit FNV-1a over bytes; independent of platform and locale.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Doubles in JSON: non-finite values become null.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace synthring
