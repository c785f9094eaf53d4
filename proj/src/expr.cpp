#include "expr.hpp"

#include <cctype>
#include <cmath>

namespace ensctl {

Expr make_num(const Rational& v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::kNum;
  n->value = v;
  return n;
}

Expr make_var(ExprKind kind) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  return n;
}

Expr make_unary(ExprKind kind, Expr a) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->args = {std::move(a)};
  return n;
}

Expr make_binary(ExprKind kind, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->args = {std::move(a), std::move(b)};
  return n;
}

Expr make_pow(Expr base, int exponent) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::kPow;
  n->exponent = exponent;
  n->args = {std::move(base)};
  return n;
}

namespace {

class ExprParser {
 public:
  explicit ExprParser(const std::string& src) : src_(src) {}

  Expr parse() {
    Expr e = sum();
    skip_ws();
    if (pos_ != src_.size()) fail("end of input or operator");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    std::string found = pos_ < src_.size() ? std::string("'") + src_[pos_] + "'" : "end of input";
    throw Error(ErrorKind::kSyntax, "syntax error at offset " + std::to_string(pos_) +
                                        ": expected " + expected + ", found " + found);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr sum() {
    Expr acc = product();
    for (;;) {
      if (accept('+')) {
        acc = make_binary(ExprKind::kAdd, acc, product());
      } else if (accept('-')) {
        acc = make_binary(ExprKind::kSub, acc, product());
      } else {
        return acc;
      }
    }
  }

  Expr product() {
    Expr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = make_binary(ExprKind::kMul, acc, unary());
      } else if (accept('/')) {
        acc = make_binary(ExprKind::kDiv, acc, unary());
      } else {
        return acc;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return make_unary(ExprKind::kNeg, unary());
    return power();
  }

  Expr power() {
    Expr base = primary();
    while (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      if (pos_ < src_.size() && src_[pos_] == '-') ++pos_;
      std::size_t digits = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (digits == pos_) {
        pos_ = start;
        fail("integer exponent");
      }
      long v = std::stol(src_.substr(start, pos_ - start));
      if (std::abs(v) > 1000000) {
        pos_ = start;
        fail("exponent of moderate size");
      }
      base = make_pow(base, static_cast<int>(v));
    }
    return base;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("number, variable, function or '('");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = sum();
      if (!accept(')')) fail("')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      std::string id = src_.substr(start, pos_ - start);
      if (id == "x") return make_var(ExprKind::kX);
      if (id == "theta") return make_var(ExprKind::kTheta);
      if (id == "pi") return make_var(ExprKind::kPi);
      ExprKind fn;
      if (id == "sin") {
        fn = ExprKind::kSin;
      } else if (id == "cos") {
        fn = ExprKind::kCos;
      } else if (id == "exp") {
        fn = ExprKind::kExp;
      } else if (id == "log") {
        fn = ExprKind::kLog;
      } else {
        pos_ = start;
        fail("x, theta, pi, sin, cos, exp or log");
      }
      if (!accept('(')) fail("'(' after function name");
      Expr arg = sum();
      if (!accept(')')) fail("')'");
      return make_unary(fn, arg);
    }
    fail("number, variable, function or '('");
  }

  Expr number() {
    std::size_t start = pos_;
    bool point = false;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' && !point) {
        point = true;
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string text = src_.substr(start, pos_ - start);
    if (text == ".") {
      pos_ = start;
      fail("digits");
    }
    return make_num(parse_rational(text));
  }

  const std::string& src_;
  std::size_t pos_ = 0;
};

int precedence(const Expr& e) {
  switch (e->kind) {
    case ExprKind::kAdd:
    case ExprKind::kSub: return 1;
    case ExprKind::kMul:
    case ExprKind::kDiv: return 2;
    case ExprKind::kNeg: return 3;
    case ExprKind::kPow: return 4;
    default: return 5;
  }
}

void write(const Expr& e, std::string& out);

void write_child(const Expr& child, int required, std::string& out) {
  bool paren = precedence(child) < required;
  if (paren) out += "(";
  write(child, out);
  if (paren) out += ")";
}

void write(const Expr& e, std::string& out) {
  switch (e->kind) {
    case ExprKind::kNum: out += rational_to_string(e->value); return;
    case ExprKind::kX: out += "x"; return;
    case ExprKind::kTheta: out += "theta"; return;
    case ExprKind::kPi: out += "pi"; return;
    case ExprKind::kAdd:
    case ExprKind::kSub:
    case ExprKind::kMul:
    case ExprKind::kDiv: {
      static const char* ops[] = {"+", "-", "*", "/"};
      int p = precedence(e);
      write_child(e->args[0], p, out);
      out += ops[static_cast<int>(e->kind) - static_cast<int>(ExprKind::kAdd)];
      write_child(e->args[1], p + 1, out);
      return;
    }
    case ExprKind::kPow:
      write_child(e->args[0], 5, out);
      out += "^" + std::to_string(e->exponent);
      return;
    case ExprKind::kNeg:
      out += "-";
      write_child(e->args[0], 3, out);
      return;
    case ExprKind::kSin:
    case ExprKind::kCos:
    case ExprKind::kExp:
    case ExprKind::kLog: {
      static const char* names[] = {"sin", "cos", "exp", "log"};
      out += names[static_cast<int>(e->kind) - static_cast<int>(ExprKind::kSin)];
      out += "(";
      write(e->args[0], out);
      out += ")";
      return;
    }
  }
}

}  // namespace

Expr parse_expr(const std::string& src) { return ExprParser(src).parse(); }

std::string serialize(const Expr& e) {
  std::string out;
  write(e, out);
  return out;
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a->kind != b->kind || a->exponent != b->exponent || a->args.size() != b->args.size()) {
    return false;
  }
  if (a->kind == ExprKind::kNum && a->value != b->value) return false;
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (!expr_equal(a->args[i], b->args[i])) return false;
  }
  return true;
}

bool depends_on_x(const Expr& e) {
  if (e->kind == ExprKind::kX) return true;
  for (const auto& a : e->args) {
    if (depends_on_x(a)) return true;
  }
  return false;
}

TaylorJet taylor_coeffs(const Expr& e, double theta, int M) {
  if (M < 0) throw Error(ErrorKind::kInvalidArgument, "Taylor order must be non-negative");
  TaylorJet jet;
  jet.order = M;
  jet.coeffs = taylor_series<double>(e, theta, M);
  return jet;
}

std::vector<double> eval_grid(const Expr& e, const ThetaGrid& grid, double x) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      out[i] = eval_expr<double>(e, x, grid.nodes[i]);
    } catch (const Error& err) {
      throw Error(err.kind(), std::string(err.what()) + " at grid node " + std::to_string(i));
    }
    if (!std::isfinite(out[i])) {
      throw Error(ErrorKind::kDomain, "non-finite value at grid node " + std::to_string(i));
    }
  }
  return out;
}

}  // namespace ensctl
