#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stablab {

// Status taxonomy shared by the C API and the CLI exit codes.
enum class ErrorCode : int {
  internal = 1,
  validation = 2,
  derivation = 3,
  verification = 4,
  io = 5,
  fit_unavailable = 6,
  wrong_regime = 7,
  blowup = 8,
  overflow = 9,
  unsupported = 10,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCode::validation, what) {}
};

class WrongRegimeError : public Error {
public:
  explicit WrongRegimeError(const std::string& what)
      : Error(ErrorCode::wrong_regime, what) {}
};

// Carries the root of the deterministic solution bracket when a closed form
// or the ODE integrator runs past it.
class BlowupError : public Error {
public:
  BlowupError(const std::string& what, double t_star)
      : Error(ErrorCode::blowup, what), t_star_(t_star) {}
  double t_star() const { return t_star_; }

private:
  double t_star_;
};

class OverflowError : public Error {
public:
  explicit OverflowError(const std::string& what)
      : Error(ErrorCode::overflow, what) {}
};

class UnsupportedError : public Error {
public:
  explicit UnsupportedError(const std::string& what)
      : Error(ErrorCode::unsupported, what) {}
};

class DerivationError : public Error {
public:
  explicit DerivationError(const std::string& what)
      : Error(ErrorCode::derivation, what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

// Integer power by binary exponentiation; exact sign handling for negative
// bases, which std::pow with a real exponent would reject.
inline double pow_int(double base, int exp) {
  double result = 1.0;
  double acc = base;
  unsigned e = static_cast<unsigned>(exp);
  while (e != 0) {
    if (e & 1u) result *= acc;
    acc *= acc;
    e >>= 1;
  }
  return result;
}

// |w|^q with fast paths for the common integer exponents. Every call site
// shares this helper so the two algebraic routes of the generator agree
// bit-for-bit.
inline double abs_pow_q(double u, double q) {
  if (q == 2.0) return u * u;
  if (q == 3.0) return u * u * u;
  return std::pow(u, q);
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace stablab
