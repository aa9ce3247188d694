#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace reco {

/// Shortest decimal that parses back to the same double.
inline std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// 10 significant digits, the CLI's output precision.
inline std::string format_sig10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline double round_sig10(double v) { return std::stod(format_sig10(v)); }

}  // namespace reco
