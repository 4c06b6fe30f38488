#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace cidet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kEigZeroTol = 1e-10;  // eigenvalues below this count as zero
inline constexpr double kDivergenceGuard = 1e9;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidTopology : public Error {
 public:
  using Error::Error;
};

class NotConnected : public Error {
 public:
  using Error::Error;
};

class ResourceExhausted : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ModelDegenerate : public Error {
 public:
  using Error::Error;
};

class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Raised when a recursion produces non-finite values or exceeds the
/// divergence guard; carries the tick at which it happened.
class NumericalDivergence : public Error {
 public:
  NumericalDivergence(const std::string& what, long tick)
      : Error(what + " (t=" + std::to_string(tick) + ")"), tick_(tick) {}
  long tick() const { return tick_; }

 private:
  long tick_;
};

inline double inf() { return std::numeric_limits<double>::infinity(); }

/// Kronecker product a (x) I_m.
inline Mat kron_identity(const Mat& a, int m) {
  Mat out = Mat::Zero(a.rows() * m, a.cols() * m);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out.block(i * m, j * m, m, m) = a(i, j) * Mat::Identity(m, m);
  return out;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

enum class Hypothesis { H0, H1 };

inline const char* to_string(Hypothesis h) { return h == Hypothesis::H0 ? "H0" : "H1"; }

}  // namespace cidet
