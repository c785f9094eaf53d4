#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace ensctl {

using Exponent = std::vector<unsigned>;

// Graded lexicographic: higher total degree first, ties broken by the
// first differing exponent (larger first).
struct GradedLex {
  bool operator()(const Exponent& a, const Exponent& b) const;
};

class Poly {
 public:
  using TermMap = std::map<Exponent, Rational, GradedLex>;

  explicit Poly(std::size_t num_vars = 1);
  static Poly constant(std::size_t num_vars, const Rational& c);
  static Poly variable(std::size_t num_vars, std::size_t index);

  std::size_t num_vars() const { return num_vars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  // -1 for the zero polynomial.
  int total_degree() const;
  Rational coeff(const Exponent& e) const;
  void add_term(const Exponent& e, const Rational& c);

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator-() const;
  Poly operator*(const Poly& o) const;
  Poly operator*(const Rational& c) const;
  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  bool operator==(const Poly& o) const;
  bool operator!=(const Poly& o) const { return !(*this == o); }

  Poly pow(unsigned k) const;
  Poly derivative(std::size_t var) const;
  // Substitute x_var -> x_var + shift.
  Poly shifted(std::size_t var, const Rational& shift) const;

  double eval(const std::vector<double>& x) const;
  Rational eval_exact(const std::vector<Rational>& x) const;

  // Univariate helpers.
  Poly antiderivative() const;
  Rational integrate_unit() const;

  std::string to_string(const std::vector<std::string>& names = {}) const;

 private:
  void check_exponent(const Exponent& e) const;

  std::size_t num_vars_;
  TermMap terms_;
};

// Double-coefficient nested Horner form of a Poly for repeated evaluation.
class HornerPoly {
 public:
  HornerPoly() = default;
  explicit HornerPoly(const Poly& p);
  double operator()(const double* x) const;

 private:
  struct Node {
    unsigned exponent;
    double coeff;               // leaf value when children is empty
    std::vector<Node> children; // next variable, exponents descending
  };
  static double eval_level(const std::vector<Node>& level, const double* x,
                           std::size_t var);
  static void insert(std::vector<Node>& level, const Exponent& e,
                     std::size_t var, double c);

  std::vector<Node> root_;
  bool constant_zero_ = true;
};

class PolyField {
 public:
  PolyField() = default;
  explicit PolyField(std::vector<Poly> components);
  static PolyField zero(std::size_t dim);
  static PolyField constant(const std::vector<Rational>& values);

  std::size_t dim() const { return components_.size(); }
  const std::vector<Poly>& components() const { return components_; }
  const Poly& operator[](std::size_t i) const { return components_[i]; }

  bool is_zero() const;
  bool is_constant() const;
  int degree() const;

  PolyField operator+(const PolyField& o) const;
  PolyField operator-(const PolyField& o) const;
  PolyField operator*(const Rational& c) const;
  bool operator==(const PolyField& o) const;
  bool operator!=(const PolyField& o) const { return !(*this == o); }

  std::vector<double> eval(const std::vector<double>& x) const;
  std::vector<Rational> eval_exact(const std::vector<Rational>& x) const;
  // Row-major dim x dim Jacobian at x.
  std::vector<double> jacobian(const std::vector<double>& x) const;

  std::string to_string(const std::vector<std::string>& names = {}) const;

 private:
  std::vector<Poly> components_;
};

class CompiledField {
 public:
  CompiledField() = default;
  explicit CompiledField(const PolyField& f);
  std::size_t dim() const { return comps_.size(); }
  void operator()(const double* x, double* out) const;

 private:
  std::vector<HornerPoly> comps_;
};

double poly_eval(const Poly& p, const std::vector<double>& x);

PolyField lie_bracket(const PolyField& X, const PolyField& Y);

Poly divergence(const PolyField& F);

PolyField ad_pullback_series(const PolyField& f, const PolyField& g,
                             const Rational& s);
PolyField ad_pullback_series(const PolyField& f, const PolyField& g, double s);

// Terms ad_g^j f / j! for j = 0..J, the last being nonzero.
std::vector<PolyField> ad_series_terms(const PolyField& f, const PolyField& g);

struct LabeledField {
  std::vector<int> label;
  PolyField field;
};

std::vector<LabeledField> iterated_brackets(const std::vector<PolyField>& fields,
                                            int depth);

// Brackets taken simultaneously in several systems with the same labels.
// A label is kept unless its bracket vanishes in every system.
struct LabeledFamily {
  std::vector<int> label;
  std::vector<PolyField> fields;  // one per system
};

std::vector<LabeledFamily> iterated_brackets_product(
    const std::vector<std::vector<PolyField>>& systems, int depth);

// Text parsing of polynomials over named variables; `bindings` substitutes
// exact constants (e.g. theta) before expansion.
Poly parse_poly(const std::string& text, const std::vector<std::string>& names,
                const std::map<std::string, Rational>& bindings = {});

std::vector<std::string> default_var_names(std::size_t n);

}  // namespace ensctl
