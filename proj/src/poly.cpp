#include "poly.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace ensctl {

bool GradedLex::operator()(const Exponent& a, const Exponent& b) const {
  unsigned da = std::accumulate(a.begin(), a.end(), 0u);
  unsigned db = std::accumulate(b.begin(), b.end(), 0u);
  if (da != db) return da > db;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return a.size() < b.size();
}

Poly::Poly(std::size_t num_vars) : num_vars_(num_vars) {
  if (num_vars == 0) throw Error(ErrorKind::kInvalidArgument, "Poly needs at least one variable");
}

Poly Poly::constant(std::size_t num_vars, const Rational& c) {
  Poly p(num_vars);
  p.add_term(Exponent(num_vars, 0), c);
  return p;
}

Poly Poly::variable(std::size_t num_vars, std::size_t index) {
  if (index >= num_vars) throw Error(ErrorKind::kDimensionMismatch, "variable index out of range");
  Poly p(num_vars);
  Exponent e(num_vars, 0);
  e[index] = 1;
  p.add_term(e, 1);
  return p;
}

void Poly::check_exponent(const Exponent& e) const {
  if (e.size() != num_vars_) {
    throw Error(ErrorKind::kDimensionMismatch, "exponent length differs from num_vars");
  }
}

int Poly::total_degree() const {
  if (terms_.empty()) return -1;
  const Exponent& e = terms_.begin()->first;  // graded order: first is max degree
  return static_cast<int>(std::accumulate(e.begin(), e.end(), 0u));
}

Rational Poly::coeff(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? Rational(0) : it->second;
}

void Poly::add_term(const Exponent& e, const Rational& c) {
  check_exponent(e);
  if (c == 0) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Poly& Poly::operator+=(const Poly& o) {
  if (o.num_vars_ != num_vars_) throw Error(ErrorKind::kDimensionMismatch, "Poly variable counts differ");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Poly& Poly::operator-=(const Poly& o) { return *this += -o; }

Poly Poly::operator+(const Poly& o) const {
  Poly r = *this;
  r += o;
  return r;
}

Poly Poly::operator-() const {
  Poly r = *this;
  for (auto& [e, c] : r.terms_) c = -c;
  return r;
}

Poly Poly::operator-(const Poly& o) const { return *this + (-o); }

Poly Poly::operator*(const Rational& c) const {
  Poly r(num_vars_);
  if (c == 0) return r;
  r.terms_ = terms_;
  for (auto& [e, v] : r.terms_) v *= c;
  return r;
}

Poly Poly::operator*(const Poly& o) const {
  if (o.num_vars_ != num_vars_) throw Error(ErrorKind::kDimensionMismatch, "Poly variable counts differ");
  Poly r(num_vars_);
  Exponent e(num_vars_);
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : o.terms_) {
      for (std::size_t i = 0; i < num_vars_; ++i) e[i] = ea[i] + eb[i];
      r.add_term(e, ca * cb);
    }
  }
  return r;
}

bool Poly::operator==(const Poly& o) const {
  return num_vars_ == o.num_vars_ && terms_ == o.terms_;
}

Poly Poly::pow(unsigned k) const {
  Poly result = constant(num_vars_, 1);
  Poly base = *this;
  while (k) {
    if (k & 1u) result = result * base;
    k >>= 1;
    if (k) base = base * base;
  }
  return result;
}

Poly Poly::derivative(std::size_t var) const {
  if (var >= num_vars_) throw Error(ErrorKind::kDimensionMismatch, "derivative variable out of range");
  Poly r(num_vars_);
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0) continue;
    Exponent d = e;
    d[var] -= 1;
    r.add_term(d, c * e[var]);
  }
  return r;
}

Poly Poly::shifted(std::size_t var, const Rational& shift) const {
  Poly lin = variable(num_vars_, var) + constant(num_vars_, shift);
  Poly r(num_vars_);
  for (const auto& [e, c] : terms_) {
    Exponent rest = e;
    rest[var] = 0;
    Poly mono(num_vars_);
    mono.add_term(rest, c);
    r += mono * lin.pow(e[var]);
  }
  return r;
}

double Poly::eval(const std::vector<double>& x) const {
  if (x.size() != num_vars_) throw Error(ErrorKind::kDimensionMismatch, "point dimension differs from num_vars");
  return HornerPoly(*this)(x.data());
}

Rational Poly::eval_exact(const std::vector<Rational>& x) const {
  if (x.size() != num_vars_) throw Error(ErrorKind::kDimensionMismatch, "point dimension differs from num_vars");
  Rational sum = 0;
  for (const auto& [e, c] : terms_) {
    Rational t = c;
    for (std::size_t i = 0; i < num_vars_; ++i) {
      for (unsigned k = 0; k < e[i]; ++k) t *= x[i];
    }
    sum += t;
  }
  return sum;
}

Poly Poly::antiderivative() const {
  if (num_vars_ != 1) throw Error(ErrorKind::kUnsupportedInput, "antiderivative is univariate only");
  Poly r(1);
  for (const auto& [e, c] : terms_) r.add_term({e[0] + 1}, c / (e[0] + 1));
  return r;
}

Rational Poly::integrate_unit() const {
  if (num_vars_ != 1) throw Error(ErrorKind::kUnsupportedInput, "integrate_unit is univariate only");
  Rational sum = 0;
  for (const auto& [e, c] : terms_) sum += c / (e[0] + 1);
  return sum;
}

std::vector<std::string> default_var_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

std::string Poly::to_string(const std::vector<std::string>& names_in) const {
  std::vector<std::string> names = names_in.empty() ? default_var_names(num_vars_) : names_in;
  if (names.size() != num_vars_) throw Error(ErrorKind::kDimensionMismatch, "name list length differs from num_vars");
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    Rational mag = abs(c);
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    first = false;
    std::vector<std::string> factors;
    for (std::size_t i = 0; i < num_vars_; ++i) {
      if (e[i] == 0) continue;
      factors.push_back(e[i] == 1 ? names[i] : names[i] + "^" + std::to_string(e[i]));
    }
    if (factors.empty() || mag != 1) factors.insert(factors.begin(), rational_to_string(mag));
    for (std::size_t k = 0; k < factors.size(); ++k) {
      if (k) os << "*";
      os << factors[k];
    }
  }
  return os.str();
}

double poly_eval(const Poly& p, const std::vector<double>& x) { return p.eval(x); }

// ---------------------------------------------------------------- Horner

HornerPoly::HornerPoly(const Poly& p) {
  for (const auto& [e, c] : p.terms()) {
    insert(root_, e, 0, c.get_d());
    constant_zero_ = false;
  }
  // Exponents must be visited in descending order.
  std::function<void(std::vector<Node>&)> sort_level = [&](std::vector<Node>& level) {
    std::sort(level.begin(), level.end(),
              [](const Node& a, const Node& b) { return a.exponent > b.exponent; });
    for (auto& n : level) sort_level(n.children);
  };
  sort_level(root_);
}

void HornerPoly::insert(std::vector<Node>& level, const Exponent& e, std::size_t var, double c) {
  auto it = std::find_if(level.begin(), level.end(),
                         [&](const Node& n) { return n.exponent == e[var]; });
  if (it == level.end()) {
    level.push_back(Node{e[var], 0.0, {}});
    it = level.end() - 1;
  }
  if (var + 1 == e.size()) {
    it->coeff += c;
  } else {
    insert(it->children, e, var + 1, c);
  }
}

double HornerPoly::eval_level(const std::vector<Node>& level, const double* x, std::size_t var) {
  double xv = x[var];
  double result = 0.0;
  unsigned prev = 0;
  for (std::size_t i = 0; i < level.size(); ++i) {
    const Node& n = level[i];
    if (i > 0) {
      for (unsigned k = n.exponent; k < prev; ++k) result *= xv;
    }
    result += n.children.empty() ? n.coeff : eval_level(n.children, x, var + 1);
    prev = n.exponent;
  }
  for (unsigned k = 0; k < prev; ++k) result *= xv;
  return result;
}

double HornerPoly::operator()(const double* x) const {
  if (constant_zero_) return 0.0;
  return eval_level(root_, x, 0);
}

// ---------------------------------------------------------------- fields

PolyField::PolyField(std::vector<Poly> components) : components_(std::move(components)) {
  for (const auto& c : components_) {
    if (c.num_vars() != components_.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "field component num_vars must equal dim");
    }
  }
}

PolyField PolyField::zero(std::size_t dim) {
  return PolyField(std::vector<Poly>(dim, Poly(dim)));
}

PolyField PolyField::constant(const std::vector<Rational>& values) {
  std::vector<Poly> comps;
  for (const auto& v : values) comps.push_back(Poly::constant(values.size(), v));
  return PolyField(std::move(comps));
}

bool PolyField::is_zero() const {
  return std::all_of(components_.begin(), components_.end(), [](const Poly& p) { return p.is_zero(); });
}

bool PolyField::is_constant() const {
  return std::all_of(components_.begin(), components_.end(),
                     [](const Poly& p) { return p.total_degree() <= 0; });
}

int PolyField::degree() const {
  int d = -1;
  for (const auto& p : components_) d = std::max(d, p.total_degree());
  return d;
}

static void require_same_dim(const PolyField& a, const PolyField& b) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::kDimensionMismatch, "field dimensions differ");
}

PolyField PolyField::operator+(const PolyField& o) const {
  require_same_dim(*this, o);
  std::vector<Poly> r;
  for (std::size_t i = 0; i < dim(); ++i) r.push_back(components_[i] + o.components_[i]);
  return PolyField(std::move(r));
}

PolyField PolyField::operator-(const PolyField& o) const {
  require_same_dim(*this, o);
  std::vector<Poly> r;
  for (std::size_t i = 0; i < dim(); ++i) r.push_back(components_[i] - o.components_[i]);
  return PolyField(std::move(r));
}

PolyField PolyField::operator*(const Rational& c) const {
  std::vector<Poly> r;
  for (const auto& p : components_) r.push_back(p * c);
  return PolyField(std::move(r));
}

bool PolyField::operator==(const PolyField& o) const { return components_ == o.components_; }

std::vector<double> PolyField::eval(const std::vector<double>& x) const {
  if (x.size() != dim()) throw Error(ErrorKind::kDimensionMismatch, "point dimension differs from field dim");
  std::vector<double> out(dim());
  CompiledField(*this)(x.data(), out.data());
  return out;
}

std::vector<Rational> PolyField::eval_exact(const std::vector<Rational>& x) const {
  std::vector<Rational> out;
  for (const auto& p : components_) out.push_back(p.eval_exact(x));
  return out;
}

std::vector<double> PolyField::jacobian(const std::vector<double>& x) const {
  std::size_t n = dim();
  std::vector<double> J(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) J[i * n + j] = components_[i].derivative(j).eval(x);
  }
  return J;
}

std::string PolyField::to_string(const std::vector<std::string>& names) const {
  std::string s = "(";
  for (std::size_t i = 0; i < dim(); ++i) {
    if (i) s += ", ";
    s += components_[i].to_string(names);
  }
  return s + ")";
}

CompiledField::CompiledField(const PolyField& f) {
  for (const auto& p : f.components()) comps_.emplace_back(p);
}

void CompiledField::operator()(const double* x, double* out) const {
  for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i](x);
}

// ---------------------------------------------------------------- brackets

PolyField lie_bracket(const PolyField& X, const PolyField& Y) {
  require_same_dim(X, Y);
  std::size_t n = X.dim();
  std::vector<Poly> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Poly acc(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (!X[j].is_zero()) acc += Y[i].derivative(j) * X[j];
      if (!Y[j].is_zero()) acc -= X[i].derivative(j) * Y[j];
    }
    out.push_back(std::move(acc));
  }
  return PolyField(std::move(out));
}

Poly divergence(const PolyField& F) {
  Poly acc(F.dim());
  for (std::size_t i = 0; i < F.dim(); ++i) acc += F[i].derivative(i);
  return acc;
}

std::vector<PolyField> ad_series_terms(const PolyField& f, const PolyField& g) {
  require_same_dim(f, g);
  if (!g.is_constant()) {
    throw Error(ErrorKind::kUnsupportedInput, "ad_pullback_series needs a constant field g");
  }
  std::vector<PolyField> terms{f};
  if (f.is_zero()) return terms;
  for (int j = 1;; ++j) {
    PolyField next = lie_bracket(g, terms.back()) * Rational(1, j);
    if (next.is_zero()) break;
    terms.push_back(std::move(next));
  }
  return terms;
}

PolyField ad_pullback_series(const PolyField& f, const PolyField& g, const Rational& s) {
  auto terms = ad_series_terms(f, g);
  PolyField acc = PolyField::zero(f.dim());
  Rational sj = 1;
  for (const auto& t : terms) {
    acc = acc + t * sj;
    sj *= s;
  }
  return acc;
}

PolyField ad_pullback_series(const PolyField& f, const PolyField& g, double s) {
  return ad_pullback_series(f, g, to_rational(s));
}

std::vector<LabeledFamily> iterated_brackets_product(
    const std::vector<std::vector<PolyField>>& systems, int depth) {
  if (depth < 1) throw Error(ErrorKind::kInvalidArgument, "depth must be at least 1");
  if (systems.empty()) throw Error(ErrorKind::kInvalidArgument, "no systems given");
  std::size_t r = systems[0].size();
  std::size_t dim = r ? systems[0][0].dim() : 0;
  for (const auto& sys : systems) {
    if (sys.size() != r) throw Error(ErrorKind::kDimensionMismatch, "systems have different field counts");
    for (const auto& f : sys) {
      if (f.dim() != dim) throw Error(ErrorKind::kDimensionMismatch, "fields have different dims");
    }
  }
  auto all_zero = [](const std::vector<PolyField>& fs) {
    return std::all_of(fs.begin(), fs.end(), [](const PolyField& f) { return f.is_zero(); });
  };

  std::vector<LabeledFamily> out;
  std::vector<LabeledFamily> level;
  for (std::size_t a = 0; a < r; ++a) {
    LabeledFamily lf{{static_cast<int>(a)}, {}};
    for (const auto& sys : systems) lf.fields.push_back(sys[a]);
    if (!all_zero(lf.fields)) level.push_back(std::move(lf));
  }
  out.insert(out.end(), level.begin(), level.end());

  for (int d = 2; d <= depth && !level.empty(); ++d) {
    std::vector<LabeledFamily> next;
    for (std::size_t a = 0; a < r; ++a) {
      for (const auto& inner : level) {
        LabeledFamily lf;
        lf.label.push_back(static_cast<int>(a));
        lf.label.insert(lf.label.end(), inner.label.begin(), inner.label.end());
        for (std::size_t s = 0; s < systems.size(); ++s) {
          lf.fields.push_back(lie_bracket(systems[s][a], inner.fields[s]));
        }
        if (!all_zero(lf.fields)) next.push_back(std::move(lf));
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return out;
}

std::vector<LabeledField> iterated_brackets(const std::vector<PolyField>& fields, int depth) {
  std::vector<LabeledField> out;
  for (auto& lf : iterated_brackets_product({fields}, depth)) {
    out.push_back(LabeledField{std::move(lf.label), std::move(lf.fields[0])});
  }
  return out;
}

}  // namespace ensctl
