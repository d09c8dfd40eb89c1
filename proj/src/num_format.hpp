#pragma once

#include <cstdio>
#include <string>

namespace ch2::detail {

// Short human-readable number for diagnostics.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace ch2::detail
