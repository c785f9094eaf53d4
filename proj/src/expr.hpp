#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"
#include "grid.hpp"
#include "mp.hpp"

namespace ensctl {

enum class ExprKind { kNum, kX, kTheta, kAdd, kSub, kMul, kDiv, kPow, kNeg, kSin, kCos, kExp, kLog, kPi };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind;
  Rational value;   // kNum
  int exponent = 0; // kPow
  std::vector<Expr> args;
};

Expr make_num(const Rational& v);
Expr make_var(ExprKind kind);
Expr make_unary(ExprKind kind, Expr a);
Expr make_binary(ExprKind kind, Expr a, Expr b);
Expr make_pow(Expr base, int exponent);

Expr parse_expr(const std::string& src);
std::string serialize(const Expr& e);
bool expr_equal(const Expr& a, const Expr& b);
bool depends_on_x(const Expr& e);

// Elementary functions per scalar type. Rationals only admit arguments
// with rational images (exp 0, sin 0, cos 0, log 1).
template <class T>
struct ScalarOps;

template <>
struct ScalarOps<double> {
  static double from(const Rational& q) { return q.get_d(); }
  static double exp(double v) { return std::exp(v); }
  static double sin(double v) { return std::sin(v); }
  static double cos(double v) { return std::cos(v); }
  static double log(double v) { return std::log(v); }
  static double pi() { return 3.141592653589793; }
};

template <>
struct ScalarOps<Mp> {
  static Mp from(const Rational& q) { return to_mp(q); }
  static Mp exp(const Mp& v) { return boost::multiprecision::exp(v); }
  static Mp sin(const Mp& v) { return boost::multiprecision::sin(v); }
  static Mp cos(const Mp& v) { return boost::multiprecision::cos(v); }
  static Mp log(const Mp& v) { return boost::multiprecision::log(v); }
  static Mp pi() {
    Mp r;
    mpfr_const_pi(r.backend().data(), MPFR_RNDN);
    return r;
  }
};

template <>
struct ScalarOps<Rational> {
  static Rational from(const Rational& q) { return q; }
  static Rational exp(const Rational& v) {
    if (v == 0) return 1;
    throw Error(ErrorKind::kUnsupportedInput, "exp of a nonzero rational is not rational");
  }
  static Rational sin(const Rational& v) {
    if (v == 0) return 0;
    throw Error(ErrorKind::kUnsupportedInput, "sin of a nonzero rational is not rational");
  }
  static Rational cos(const Rational& v) {
    if (v == 0) return 1;
    throw Error(ErrorKind::kUnsupportedInput, "cos of a nonzero rational is not rational");
  }
  static Rational log(const Rational& v) {
    if (v == 1) return 0;
    throw Error(ErrorKind::kUnsupportedInput, "log of a rational other than 1 is not rational");
  }
  static Rational pi() { throw Error(ErrorKind::kUnsupportedInput, "pi is not rational"); }
};

template <class T>
T eval_expr(const Expr& e, const T& x, const T& theta) {
  using Ops = ScalarOps<T>;
  switch (e->kind) {
    case ExprKind::kNum: return Ops::from(e->value);
    case ExprKind::kX: return x;
    case ExprKind::kTheta: return theta;
    case ExprKind::kPi: return Ops::pi();
    case ExprKind::kAdd: return T(eval_expr(e->args[0], x, theta) + eval_expr(e->args[1], x, theta));
    case ExprKind::kSub: return T(eval_expr(e->args[0], x, theta) - eval_expr(e->args[1], x, theta));
    case ExprKind::kMul: return T(eval_expr(e->args[0], x, theta) * eval_expr(e->args[1], x, theta));
    case ExprKind::kDiv: {
      T d = eval_expr(e->args[1], x, theta);
      if (d == 0) throw Error(ErrorKind::kDomain, "division by zero");
      return T(eval_expr(e->args[0], x, theta) / d);
    }
    case ExprKind::kPow: {
      T b = eval_expr(e->args[0], x, theta);
      int n = e->exponent;
      T r = Ops::from(1);
      for (int k = 0; k < std::abs(n); ++k) r = T(r * b);
      if (n < 0) {
        if (r == 0) throw Error(ErrorKind::kDomain, "negative power of zero");
        r = T(Ops::from(1) / r);
      }
      return r;
    }
    case ExprKind::kNeg: return T(-eval_expr(e->args[0], x, theta));
    case ExprKind::kSin: return Ops::sin(eval_expr(e->args[0], x, theta));
    case ExprKind::kCos: return Ops::cos(eval_expr(e->args[0], x, theta));
    case ExprKind::kExp: return Ops::exp(eval_expr(e->args[0], x, theta));
    case ExprKind::kLog: {
      T a = eval_expr(e->args[0], x, theta);
      if (!(a > 0)) throw Error(ErrorKind::kDomain, "log of a non-positive value");
      return Ops::log(a);
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "corrupt expression node");
}

// Truncated power series in x about 0, all of length M + 1.
template <class T>
std::vector<T> taylor_series(const Expr& e, const T& theta, int M) {
  using Ops = ScalarOps<T>;
  using S = std::vector<T>;
  const std::size_t n = static_cast<std::size_t>(M) + 1;
  auto constant = [&](const T& c) {
    S s(n, Ops::from(0));
    s[0] = c;
    return s;
  };
  auto mul = [&](const S& a, const S& b) {
    S c(n, Ops::from(0));
    for (std::size_t k = 0; k < n; ++k) {
      T acc = Ops::from(0);
      for (std::size_t j = 0; j <= k; ++j) acc += a[j] * b[k - j];
      c[k] = acc;
    }
    return c;
  };
  auto div = [&](const S& a, const S& b) {
    if (b[0] == 0) throw Error(ErrorKind::kDomain, "division series singular at x = 0");
    S c(n, Ops::from(0));
    for (std::size_t k = 0; k < n; ++k) {
      T acc = a[k];
      for (std::size_t j = 1; j <= k; ++j) acc -= b[j] * c[k - j];
      c[k] = T(acc / b[0]);
    }
    return c;
  };

  switch (e->kind) {
    case ExprKind::kNum: return constant(Ops::from(e->value));
    case ExprKind::kTheta: return constant(theta);
    case ExprKind::kPi: return constant(Ops::pi());
    case ExprKind::kX: {
      S s = constant(Ops::from(0));
      if (n > 1) s[1] = Ops::from(1);
      return s;
    }
    case ExprKind::kAdd:
    case ExprKind::kSub: {
      S a = taylor_series(e->args[0], theta, M);
      S b = taylor_series(e->args[1], theta, M);
      for (std::size_t k = 0; k < n; ++k) {
        a[k] = e->kind == ExprKind::kAdd ? T(a[k] + b[k]) : T(a[k] - b[k]);
      }
      return a;
    }
    case ExprKind::kNeg: {
      S a = taylor_series(e->args[0], theta, M);
      for (auto& v : a) v = T(-v);
      return a;
    }
    case ExprKind::kMul:
      return mul(taylor_series(e->args[0], theta, M), taylor_series(e->args[1], theta, M));
    case ExprKind::kDiv:
      return div(taylor_series(e->args[0], theta, M), taylor_series(e->args[1], theta, M));
    case ExprKind::kPow: {
      S base = taylor_series(e->args[0], theta, M);
      S r = constant(Ops::from(1));
      S p = base;
      unsigned k = static_cast<unsigned>(std::abs(e->exponent));
      while (k) {
        if (k & 1u) r = mul(r, p);
        k >>= 1;
        if (k) p = mul(p, p);
      }
      if (e->exponent < 0) {
        if (r[0] == 0) throw Error(ErrorKind::kDomain, "negative power singular at x = 0");
        r = div(constant(Ops::from(1)), r);
      }
      return r;
    }
    case ExprKind::kExp: {
      S a = taylor_series(e->args[0], theta, M);
      S r(n, Ops::from(0));
      r[0] = Ops::exp(a[0]);
      for (std::size_t k = 1; k < n; ++k) {
        T acc = Ops::from(0);
        for (std::size_t j = 1; j <= k; ++j) acc += T(j) * a[j] * r[k - j];
        r[k] = T(acc / T(k));
      }
      return r;
    }
    case ExprKind::kSin:
    case ExprKind::kCos: {
      S a = taylor_series(e->args[0], theta, M);
      S s(n, Ops::from(0)), c(n, Ops::from(0));
      s[0] = Ops::sin(a[0]);
      c[0] = Ops::cos(a[0]);
      for (std::size_t k = 1; k < n; ++k) {
        T as = Ops::from(0), ac = Ops::from(0);
        for (std::size_t j = 1; j <= k; ++j) {
          as += T(j) * a[j] * c[k - j];
          ac += T(j) * a[j] * s[k - j];
        }
        s[k] = T(as / T(k));
        c[k] = T(-ac / T(k));
      }
      return e->kind == ExprKind::kSin ? s : c;
    }
    case ExprKind::kLog: {
      S a = taylor_series(e->args[0], theta, M);
      if (a[0] == 0) throw Error(ErrorKind::kDomain, "log series singular at x = 0");
      if (!(a[0] > 0)) throw Error(ErrorKind::kDomain, "log of a non-positive value at x = 0");
      S l(n, Ops::from(0));
      l[0] = Ops::log(a[0]);
      for (std::size_t k = 1; k < n; ++k) {
        T acc = Ops::from(0);
        for (std::size_t j = 1; j < k; ++j) acc += T(j) * l[j] * a[k - j];
        l[k] = T((a[k] - acc / T(k)) / a[0]);
      }
      return l;
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "corrupt expression node");
}

struct TaylorJet {
  int order = 0;
  std::vector<double> coeffs;
};

TaylorJet taylor_coeffs(const Expr& e, double theta, int M);

// Values of e(x, theta) at every grid node; failures name the node.
std::vector<double> eval_grid(const Expr& e, const ThetaGrid& grid, double x);

}  // namespace ensctl
