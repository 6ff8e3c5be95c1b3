#ifndef RISKCONTRACT_FORMAT_HPP
#define RISKCONTRACT_FORMAT_HPP

#include <cmath>
#include <cstdio>
#include <string>

namespace riskcontract {

/// Round-trippable decimal form (17 significant digits). All CSV output
/// goes through this so files are byte-identical across runs.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace riskcontract

#endif  // RISKCONTRACT_FORMAT_HPP
