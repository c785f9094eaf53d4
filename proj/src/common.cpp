#include "common.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace ensctl {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kUnsupportedInput: return "unsupported_input";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kSyntax: return "syntax";
    case ErrorKind::kDegenerate: return "degenerate_basis";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kAccuracy: return "accuracy";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Rational to_rational(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::kDomain, "non-finite value has no rational form");
  }
  return Rational(value);
}

namespace {

mpz_class pow10(unsigned long k) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, k);
  return r;
}

Rational parse_decimal(const std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    neg = s[i] == '-';
    ++i;
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_point = false;
  bool any_digit = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      any_digit = true;
      if (seen_point) ++frac_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw Error(ErrorKind::kSyntax, "not a number: '" + s + "'");
  long exp10 = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    std::size_t used = 0;
    try {
      exp10 = std::stol(s.substr(i), &used);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kSyntax, "bad exponent in '" + s + "'");
    }
    i += used;
  }
  if (i != s.size()) throw Error(ErrorKind::kSyntax, "not a number: '" + s + "'");
  mpz_class mant(digits, 10);
  long shift = exp10 - frac_digits;
  Rational q;
  if (shift >= 0) {
    q = Rational(mant * pow10(static_cast<unsigned long>(shift)));
  } else {
    q = Rational(mant, pow10(static_cast<unsigned long>(-shift)));
  }
  q.canonicalize();
  return neg ? Rational(-q) : q;
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  Rational num = parse_decimal(s.substr(0, slash));
  Rational den = parse_decimal(s.substr(slash + 1));
  if (den == 0) throw Error(ErrorKind::kDomain, "zero denominator in '" + text + "'");
  return num / den;
}

std::string rational_to_string(const Rational& q) {
  mpz_class den = q.get_den();
  unsigned long twos = mpz_scan1(den.get_mpz_t(), 0);
  mpz_class rest = den >> twos;
  unsigned long fives = 0;
  while (rest % 5 == 0) {
    rest /= 5;
    ++fives;
  }
  if (rest != 1) return q.get_num().get_str() + "/" + den.get_str();
  if (den == 1) return q.get_num().get_str();
  unsigned long k = std::max(twos, fives);
  mpz_class scaled = q.get_num() * pow10(k) / den;
  bool neg = scaled < 0;
  std::string digits = mpz_class(abs(scaled)).get_str();
  if (digits.size() <= k) digits.insert(0, k - digits.size() + 1, '0');
  std::string out = digits.substr(0, digits.size() - k) + "." + digits.substr(digits.size() - k);
  while (out.back() == '0') out.pop_back();
  if (out.back() == '.') out.pop_back();
  return neg ? "-" + out : out;
}

std::string format_double(double v) {
  if (v == 0.0) return "0";
  // Shortest text that reads back to the same double.
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace ensctl
