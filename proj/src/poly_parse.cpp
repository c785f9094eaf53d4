#include <cctype>

#include "poly.hpp"

namespace ensctl {

namespace {

class PolyParser {
 public:
  PolyParser(const std::string& src, const std::vector<std::string>& names,
             const std::map<std::string, Rational>& bindings)
      : src_(src), names_(names), bindings_(bindings) {}

  Poly parse() {
    Poly p = sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected character");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::kSyntax,
                "polynomial parse error at offset " + std::to_string(pos_) + ": " + what);
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

  Poly sum() {
    Poly acc = product();
    for (;;) {
      if (accept('+')) {
        acc += product();
      } else if (accept('-')) {
        acc -= product();
      } else {
        return acc;
      }
    }
  }

  Poly product() {
    Poly acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Poly d = unary();
        if (d.total_degree() > 0) {
          pos_ = at;
          fail("division by a non-constant polynomial");
        }
        Rational c = d.coeff(Exponent(names_.size(), 0));
        if (c == 0) {
          pos_ = at;
          fail("division by zero");
        }
        acc = acc * Rational(1 / c);
      } else {
        return acc;
      }
    }
  }

  Poly unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Poly power() {
    Poly base = primary();
    while (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) fail("expected a non-negative integer exponent");
      base = base.pow(static_cast<unsigned>(std::stoul(src_.substr(start, pos_ - start))));
    }
    return base;
  }

  Poly primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Poly p = sum();
      if (!accept(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      std::string id = src_.substr(start, pos_ - start);
      for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == id) return Poly::variable(names_.size(), i);
      }
      auto it = bindings_.find(id);
      if (it != bindings_.end()) return Poly::constant(names_.size(), it->second);
      pos_ = start;
      fail("unknown identifier '" + id + "'");
    }
    fail("expected a number, variable or '('");
  }

  Poly number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
      ++pos_;
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
    Rational q;
    try {
      q = parse_rational(src_.substr(start, pos_ - start));
    } catch (const Error&) {
      pos_ = start;
      fail("malformed number");
    }
    return Poly::constant(names_.size(), q);
  }

  const std::string& src_;
  const std::vector<std::string>& names_;
  const std::map<std::string, Rational>& bindings_;
  std::size_t pos_ = 0;
};

}  // namespace

Poly parse_poly(const std::string& text, const std::vector<std::string>& names,
                const std::map<std::string, Rational>& bindings) {
  if (names.empty()) throw Error(ErrorKind::kInvalidArgument, "parse_poly needs variable names");
  return PolyParser(text, names, bindings).parse();
}

}  // namespace ensctl
