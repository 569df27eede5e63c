#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <stdexcept>
#include <string>

namespace fsa {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Enumeration or dynamic-program state space larger than the configured cap.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A floating-point path produced a non-finite value.
class NumericOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Locale-independent formatting, 12 significant digits. Used by every
/// emitter so identical invocations produce byte-identical files.
inline std::string fmt_g12(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

}  // namespace fsa
