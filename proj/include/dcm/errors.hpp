#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace dcm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input data or parameters (bad radii, negative step, unknown key, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Coincident centers: the contact normal is undefined.
class SingularGradientError : public Error {
 public:
  SingularGradientError(std::size_t i, std::size_t j)
      : Error("coincident centers for pair (" + std::to_string(i) + ", " + std::to_string(j) +
              "): contact normal undefined"),
        i_(i),
        j_(j) {}
  std::size_t first() const { return i_; }
  std::size_t second() const { return j_; }

 private:
  std::size_t i_;
  std::size_t j_;
};

inline std::string format_length(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// A configuration violates non-overlap beyond the allowed tolerance.
class InfeasibleConfigurationError : public Error {
 public:
  InfeasibleConfigurationError(std::size_t i, std::size_t j, double distance, const std::string& context = "")
      : Error((context.empty() ? std::string() : context + ": ") + "disks " + std::to_string(i) + " and " +
              std::to_string(j) + " overlap (signed distance " + format_length(distance) + ")"),
        i_(i),
        j_(j),
        distance_(distance) {}
  std::size_t first() const { return i_; }
  std::size_t second() const { return j_; }
  double distance() const { return distance_; }

 private:
  std::size_t i_;
  std::size_t j_;
  double distance_;
};

/// Numerical solver failure (non-convergence, line-search breakdown, quadrature failure).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// File-system or serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcm
