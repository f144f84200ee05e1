#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace airfl {

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Raised when a scenario / experiment configuration is inconsistent.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an effective channel magnitude is too small to invert.
class DegenerateChannelError : public std::runtime_error {
 public:
  explicit DegenerateChannelError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Raised on malformed input files (IDX parsing, gzip inflation).
class DataFormatError : public std::runtime_error {
 public:
  DataFormatError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (byte offset " +
                           std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

/// Raised when an optimization stage cannot proceed (infeasible start, ...).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// dB-valued config inputs are converted once, at the boundary; everything
// downstream works in linear scale.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) {
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

// Effective-channel magnitudes below this are treated as degenerate rather
// than inverted into huge scalars.
inline constexpr double kDegenerateGain = 1e-12;

}  // namespace airfl
