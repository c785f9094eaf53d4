#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ensctl {

using Rational = mpq_class;

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kUnsupportedInput,
  kDomain,
  kSyntax,
  kDegenerate,
  kInfeasible,
  kAccuracy,
  kDivergence,
  kConfig,
  kIo,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Exact binary value of a finite double.
Rational to_rational(double value);

// Exact value of a decimal literal such as "-1.25e-3" or "7/3".
Rational parse_rational(const std::string& text);

// Shortest decimal if the denominator is 2^a 5^b, otherwise "p/q".
std::string rational_to_string(const Rational& q);

// Shortest round-trip decimal form used by every CSV writer and message.
std::string format_double(double v);

}  // namespace ensctl
