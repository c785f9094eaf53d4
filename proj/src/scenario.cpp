#include "scenario.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "control.hpp"
#include "expr.hpp"
#include "grid.hpp"
#include "lieext.hpp"
#include "moments.hpp"
#include "odesim.hpp"
#include "rigidbody.hpp"

namespace ensctl {

const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds{"rigid-check",    "rigid-generic", "model-synthesize",
                                              "lieext-reduce",  "lieext-converge", "flow-verify",
                                              "rank-check"};
  return kinds;
}

namespace {

// ---------------------------------------------------------------- loading

[[noreturn]] void bad(const YAML::Node& n, const std::string& path, const std::string& msg) {
  std::string where = path.empty() ? "<root>" : path;
  if (n.IsDefined()) {
    YAML::Mark m = n.Mark();
    if (m.line >= 0) {
      where += " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
    }
  }
  throw Error(ErrorKind::kConfig, where + ": " + msg);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double as_real(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) bad(n, path, "expected a number");
  double v;
  try {
    v = n.as<double>();
  } catch (const YAML::Exception&) {
    bad(n, path, "expected a number, got '" + n.Scalar() + "'");
  }
  if (!std::isfinite(v)) bad(n, path, "must be finite");
  return v;
}

long long as_int(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) bad(n, path, "expected an integer");
  try {
    return n.as<long long>();
  } catch (const YAML::Exception&) {
    bad(n, path, "expected an integer, got '" + n.Scalar() + "'");
  }
}

bool as_bool(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) bad(n, path, "expected true or false");
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    bad(n, path, "expected true or false, got '" + n.Scalar() + "'");
  }
}

std::string as_string(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) bad(n, path, "expected a string");
  return n.Scalar();
}

std::vector<double> as_reals(const YAML::Node& n, const std::string& path, std::size_t size = 0) {
  if (!n.IsSequence()) bad(n, path, "expected a list of numbers");
  if (size && n.size() != size) bad(n, path, "expected " + std::to_string(size) + " entries");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(as_real(n[i], index(path, i)));
  return out;
}

class Map {
 public:
  Map(const YAML::Node& n, std::string path) : n_(n), path_(std::move(path)) {
    if (!n_.IsMap()) bad(n_, path_, "expected a mapping");
  }

  bool has(const std::string& key) const {
    const YAML::Node& c = n_;
    YAML::Node v = c[key];
    return v.IsDefined() && !v.IsNull();
  }
  YAML::Node at(const std::string& key) {
    seen_.insert(key);
    const YAML::Node& c = n_;
    return c[key];
  }
  YAML::Node required(const std::string& key) {
    if (!has(key)) {
      seen_.insert(key);
      bad(n_, path_, "missing required key '" + key + "'");
    }
    return at(key);
  }
  std::string path(const std::string& key) const { return join(path_, key); }
  const YAML::Node& node() const { return n_; }

  void finish() const {
    for (auto it = n_.begin(); it != n_.end(); ++it) {
      std::string k = it->first.as<std::string>();
      if (!seen_.count(k)) bad(it->first, join(path_, k), "unknown key");
    }
  }

 private:
  YAML::Node n_;
  std::string path_;
  std::set<std::string> seen_;
};

using Check = std::function<const char*(double)>;

const char* positive(double v) { return v > 0 ? nullptr : "must be positive"; }

double real(Map& m, const std::string& key, std::optional<double> def, const Check& check = {}) {
  if (!m.has(key)) {
    m.at(key);
    if (!def) bad(m.node(), m.path(key), "missing required key");
    return *def;
  }
  YAML::Node n = m.at(key);
  double v = as_real(n, m.path(key));
  if (check) {
    if (const char* msg = check(v)) bad(n, m.path(key), msg);
  }
  return v;
}

long long integer(Map& m, const std::string& key, std::optional<long long> def, long long lo) {
  if (!m.has(key)) {
    m.at(key);
    if (!def) bad(m.node(), m.path(key), "missing required key");
    return *def;
  }
  YAML::Node n = m.at(key);
  long long v = as_int(n, m.path(key));
  if (v < lo) bad(n, m.path(key), "must be at least " + std::to_string(lo));
  return v;
}

bool boolean(Map& m, const std::string& key, bool def) {
  if (!m.has(key)) {
    m.at(key);
    return def;
  }
  return as_bool(m.at(key), m.path(key));
}

ojson optional_real(Map& m, const std::string& key, const Check& check = {}) {
  if (!m.has(key)) {
    m.at(key);
    return nullptr;
  }
  return real(m, key, std::nullopt, check);
}

ojson reals(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::vector<double> to_reals(const ojson& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(x.get<double>());
  return v;
}

ojson read_grid(Map& parent, const std::string& key, const char* def_kind, int def_n) {
  ojson g;
  if (!parent.has(key)) {
    parent.at(key);
    g["kind"] = def_kind;
    g["interval"] = reals({0.0, 1.0});
    g["n"] = def_n;
    return g;
  }
  Map m(parent.at(key), parent.path(key));
  std::string kind = m.has("kind") ? as_string(m.at("kind"), m.path("kind")) : (m.at("kind"), std::string(def_kind));
  try {
    parse_grid_kind(kind);
  } catch (const Error& e) {
    bad(m.node()["kind"], m.path("kind"), e.what());
  }
  std::vector<double> iv{0.0, 1.0};
  if (m.has("interval")) iv = as_reals(m.at("interval"), m.path("interval"), 2);
  else m.at("interval");
  if (!(iv[1] > iv[0])) bad(m.node()["interval"], m.path("interval"), "interval must satisfy a < b");
  long long n = integer(m, "n", def_n, 1);
  m.finish();
  g["kind"] = kind;
  g["interval"] = reals(iv);
  g["n"] = n;
  return g;
}

ThetaGrid build_grid(const ojson& g) {
  return make_grid(parse_grid_kind(g["kind"].get<std::string>()), g["interval"][0].get<double>(),
                   g["interval"][1].get<double>(), g["n"].get<int>());
}

ojson read_expr(Map& m, const std::string& key, std::optional<std::string> def = std::nullopt) {
  std::string src;
  if (!m.has(key)) {
    m.at(key);
    if (!def) bad(m.node(), m.path(key), "missing required key");
    src = *def;
  } else {
    src = as_string(m.at(key), m.path(key));
  }
  try {
    parse_expr(src);
  } catch (const Error& e) {
    bad(m.node()[key], m.path(key), e.what());
  }
  return src;
}

// Signals: number -> constant, list -> polynomial coefficients, or one of
// {poly: [...]}, {sin: {...}}, {sum: [...]}, {sampled: {...}}.
ojson read_signal(const YAML::Node& n, const std::string& path) {
  ojson out;
  if (n.IsScalar()) {
    out["poly"] = reals({as_real(n, path)});
    return out;
  }
  if (n.IsSequence()) {
    out["poly"] = reals(as_reals(n, path));
    return out;
  }
  if (!n.IsMap() || n.size() != 1) bad(n, path, "expected a number, a coefficient list or one of poly, sin, sum, sampled");
  std::string tag = n.begin()->first.as<std::string>();
  YAML::Node body = n.begin()->second;
  std::string p = join(path, tag);
  if (tag == "poly") {
    out["poly"] = reals(as_reals(body, p));
  } else if (tag == "sin") {
    Map m(body, p);
    ojson s;
    s["gain"] = real(m, "gain", 1.0);
    if (m.has("inv_freq_sq")) {
      if (m.has("rate") || m.has("phase")) bad(body, p, "give either inv_freq_sq or rate/phase");
      s["inv_freq_sq"] = real(m, "inv_freq_sq", std::nullopt, positive);
    } else {
      m.at("inv_freq_sq");
      s["rate"] = real(m, "rate", std::nullopt);
      s["phase"] = real(m, "phase", 0.0);
    }
    if (m.has("envelope")) {
      s["envelope"] = read_signal(m.at("envelope"), m.path("envelope"));
    } else {
      m.at("envelope");
      s["envelope"] = ojson{{"poly", reals({1.0})}};
    }
    m.finish();
    out["sin"] = s;
  } else if (tag == "sum") {
    if (!body.IsSequence() || body.size() == 0) bad(body, p, "expected a nonempty list of signals");
    ojson terms = ojson::array();
    for (std::size_t i = 0; i < body.size(); ++i) terms.push_back(read_signal(body[i], index(p, i)));
    out["sum"] = terms;
  } else if (tag == "sampled") {
    Map m(body, p);
    std::vector<double> t = as_reals(m.required("times"), m.path("times"));
    std::vector<double> v = as_reals(m.required("values"), m.path("values"), t.size());
    ojson s;
    s["times"] = reals(t);
    s["values"] = reals(v);
    if (m.has("slopes")) s["slopes"] = reals(as_reals(m.at("slopes"), m.path("slopes"), t.size()));
    else m.at("slopes");
    m.finish();
    out["sampled"] = s;
  } else {
    bad(n, path, "unknown signal type '" + tag + "'");
  }
  return out;
}

ControlSignal build_signal(const ojson& j) {
  if (j.contains("poly")) return ControlSignal::polynomial(to_reals(j["poly"]));
  if (j.contains("sin")) {
    const ojson& s = j["sin"];
    ControlSignal env = build_signal(s["envelope"]);
    if (s.contains("inv_freq_sq")) {
      return ControlSignal::sinusoid_inv_freq_sq(s["gain"].get<double>(), s["inv_freq_sq"].get<double>(), env);
    }
    return ControlSignal::sinusoid(s["gain"].get<double>(), s["rate"].get<double>(), s["phase"].get<double>(), env);
  }
  if (j.contains("sum")) {
    std::vector<ControlSignal> terms;
    for (const auto& t : j["sum"]) terms.push_back(build_signal(t));
    return ControlSignal::sum(std::move(terms));
  }
  const ojson& s = j["sampled"];
  std::optional<std::vector<double>> slopes;
  if (s.contains("slopes")) slopes = to_reals(s["slopes"]);
  return ControlSignal::sampled(to_reals(s["times"]), to_reals(s["values"]), slopes);
}

ojson signal_or(Map& m, const std::string& key, double def) {
  if (!m.has(key)) {
    m.at(key);
    return ojson{{"poly", reals({def})}};
  }
  ojson j = read_signal(m.at(key), m.path(key));
  try {
    build_signal(j);
  } catch (const Error& e) {
    bad(m.node()[key], m.path(key), e.what());
  }
  return j;
}

std::vector<std::string> var_names(std::size_t dim) { return default_var_names(dim); }

PolyField build_field(const ojson& comps, std::size_t dim, std::optional<double> theta) {
  std::map<std::string, Rational> bind;
  if (theta) bind["theta"] = to_rational(*theta);
  std::vector<Poly> ps;
  for (const auto& c : comps) ps.push_back(parse_poly(c.get<std::string>(), var_names(dim), bind));
  return PolyField(std::move(ps));
}

// A vector field as a list of component strings over x1..x_dim (and theta).
ojson read_field(Map& m, const std::string& key, std::size_t dim) {
  YAML::Node n = m.required(key);
  std::string p = m.path(key);
  if (!n.IsSequence()) bad(n, p, "expected a list of component polynomials");
  if (dim && n.size() != dim) bad(n, p, "expected " + std::to_string(dim) + " components");
  ojson comps = ojson::array();
  for (std::size_t i = 0; i < n.size(); ++i) {
    std::string s = n[i].IsScalar() ? n[i].Scalar() : (bad(n[i], index(p, i), "expected a polynomial"), "");
    try {
      parse_poly(s, var_names(n.size()), {{"theta", Rational(1)}});
    } catch (const Error& e) {
      bad(n[i], index(p, i), e.what());
    }
    comps.push_back(s);
  }
  return comps;
}

template <class F>
void validated(const YAML::Node& n, const std::string& path, const F& f) {
  try {
    f();
  } catch (const Error& e) {
    bad(n, path, e.what());
  }
}

void load_rigid_check(Map& m, ojson& p) {
  YAML::Node in = m.required("inertia");
  std::string ip = m.path("inertia");
  if (!in.IsSequence() || in.size() == 0) bad(in, ip, "expected a nonempty list of inertia triples");
  double delta_J = real(m, "delta_J", 1e-9, positive);
  ojson js = ojson::array();
  bool single = in[0].IsScalar();
  std::size_t count = single ? 1 : in.size();
  for (std::size_t b = 0; b < count; ++b) {
    YAML::Node t = single ? in : in[b];
    std::string tp = single ? ip : index(ip, b);
    std::vector<double> J = as_reals(t, tp, 3);
    validated(t, tp, [&] { InertiaSpec::make({J[0], J[1], J[2]}, delta_J); });
    js.push_back(reals(J));
  }
  std::vector<double> L = as_reals(m.required("L"), m.path("L"), 3);
  validated(m.node()["L"], m.path("L"), [&] { TorqueAxis::make({L[0], L[1], L[2]}); });
  p["inertia"] = js;
  p["L"] = reals(L);
  p["delta_J"] = delta_J;
  p["exact"] = boolean(m, "exact", false);
  p["tau"] = real(m, "tau", 1e-10, positive);
  p["tau0"] = real(m, "tau0", 1e-11, positive);
  if (p["tau0"].get<double>() > p["tau"].get<double>()) bad(m.node(), m.path("tau0"), "tau0 must not exceed tau");
  p["scaling_eps"] = optional_real(m, "scaling_eps", positive);
  if (m.has("expect")) {
    std::string e = as_string(m.at("expect"), m.path("expect"));
    if (e != "generating" && e != "singular" && e != "borderline") {
      bad(m.node()["expect"], m.path("expect"), "must be generating, singular or borderline");
    }
    p["expect"] = e;
  } else {
    m.at("expect");
    p["expect"] = nullptr;
  }
}

void load_rigid_generic(Map& m, ojson& p) {
  p["N"] = integer(m, "N", std::nullopt, 1);
  p["samples"] = integer(m, "samples", std::nullopt, 1);
  std::vector<double> box{0.5, 3.0};
  if (m.has("box")) {
    box = as_reals(m.at("box"), m.path("box"), 2);
    if (!(box[0] > 0 && box[1] > box[0])) bad(m.node()["box"], m.path("box"), "box must satisfy 0 < lo < hi");
  } else {
    m.at("box");
  }
  p["box"] = reals(box);
  p["min_gap"] = real(m, "min_gap", 1e-3, positive);
  if (m.has("L")) {
    std::vector<double> L = as_reals(m.at("L"), m.path("L"), 3);
    validated(m.node()["L"], m.path("L"), [&] { TorqueAxis::make({L[0], L[1], L[2]}); });
    p["L"] = reals(L);
  } else {
    m.at("L");
    p["L"] = nullptr;
  }
  p["cross_checks"] = integer(m, "cross_checks", 10, 0);
  p["tau"] = real(m, "tau", 1e-10, positive);
  p["tau0"] = real(m, "tau0", 1e-11, positive);
  p["min_fraction"] = optional_real(m, "min_fraction", [](double v) {
    return v >= 0 && v <= 1 ? nullptr : "must lie in [0, 1]";
  });
}

void load_model(Map& m, ojson& p) {
  p["f_theta"] = read_expr(m, "f_theta");
  p["target"] = read_expr(m, "target");
  if (depends_on_x(parse_expr(p["target"].get<std::string>()))) {
    bad(m.node()["target"], m.path("target"), "target must depend on theta only");
  }
  p["grid"] = read_grid(m, "grid", "gauss", 64);
  p["eps1"] = real(m, "eps1", std::nullopt, positive);
  p["rho"] = real(m, "rho", 1.0, positive);
  p["mu_f"] = real(m, "mu_f", std::nullopt, positive);
  if (m.has("R")) {
    p["R"] = integer(m, "R", std::nullopt, 1);
  } else {
    m.at("R");
    p["R"] = nullptr;
  }
  p["R_max"] = integer(m, "R_max", 12, 1);
  p["eps_floor"] = real(m, "eps_floor", 1e-60, positive);
  p["ode_check"] = boolean(m, "ode_check", true);
  p["ode_tolerance"] = real(m, "ode_tolerance", 1e-6, positive);
  p["terminal_state_tolerance"] = real(m, "terminal_state_tolerance", 1e-10, positive);
  p["quad_tol"] = real(m, "quad_tol", 1e-20, positive);
  p["extra_digits"] = integer(m, "extra_digits", 30, 10);
  p["T"] = real(m, "T", 1.0, positive);
  p["control_samples"] = integer(m, "control_samples", 101, 2);
}

void load_reduce(Map& m, ojson& p) {
  p["u_e"] = signal_or(m, "u_e", 0.0);
  p["v_e"] = signal_or(m, "v_e", 0.0);
  p["w_e"] = signal_or(m, "w_e", 1.0);
  if (!build_signal(p["w_e"]).is_differentiable()) {
    bad(m.node()["w_e"], m.path("w_e"), "w_e must be differentiable (sampled signals need slopes)");
  }
  p["T"] = real(m, "T", 1.0, positive);
  p["n"] = integer(m, "n", std::nullopt, 1);
  p["samples"] = integer(m, "samples", 1001, 2);
}

void load_converge(Map& m, ojson& p) {
  p["grid"] = read_grid(m, "grid", "gauss", 16);
  std::vector<double> x0 = as_reals(m.required("x0"), m.path("x0"));
  if (x0.empty()) bad(m.node()["x0"], m.path("x0"), "must be nonempty");
  p["x0"] = reals(x0);
  p["X"] = read_field(m, "X", x0.size());
  p["Y"] = read_field(m, "Y", x0.size());
  p["u_e"] = signal_or(m, "u_e", 0.0);
  p["v_e"] = signal_or(m, "v_e", 0.0);
  p["w_e"] = signal_or(m, "w_e", 1.0);
  if (!build_signal(p["w_e"]).is_differentiable()) {
    bad(m.node()["w_e"], m.path("w_e"), "w_e must be differentiable (sampled signals need slopes)");
  }
  p["T"] = real(m, "T", 1.0, positive);
  YAML::Node nl = m.required("n_list");
  if (!nl.IsSequence() || nl.size() == 0) bad(nl, m.path("n_list"), "expected a nonempty list of integers");
  ojson ns = ojson::array();
  long long prev = 0;
  for (std::size_t i = 0; i < nl.size(); ++i) {
    long long v = as_int(nl[i], index(m.path("n_list"), i));
    if (v <= prev) bad(nl[i], index(m.path("n_list"), i), "n_list must be positive and increasing");
    prev = v;
    ns.push_back(v);
  }
  p["n_list"] = ns;
  p["h_ref"] = real(m, "h_ref", 1e-3, positive);
  p["step_ratio"] = real(m, "step_ratio", 40.0, [](double v) {
    return v >= 20 ? nullptr : "must be at least 20 (h <= eps^2/20)";
  });
  if (m.has("slope_range")) {
    std::vector<double> r = as_reals(m.at("slope_range"), m.path("slope_range"), 2);
    if (!(r[0] <= r[1])) bad(m.node()["slope_range"], m.path("slope_range"), "must satisfy lo <= hi");
    p["slope_range"] = reals(r);
  } else {
    m.at("slope_range");
    p["slope_range"] = nullptr;
  }
  p["require_decreasing"] = boolean(m, "require_decreasing", false);
}

void load_flow(Map& m, ojson& p) {
  std::vector<double> x0 = as_reals(m.required("x0"), m.path("x0"));
  if (x0.empty()) bad(m.node()["x0"], m.path("x0"), "must be nonempty");
  p["x0"] = reals(x0);
  p["f"] = read_field(m, "f", x0.size());
  p["g"] = read_field(m, "g", x0.size());
  if (!build_field(p["g"], x0.size(), 1.0).is_constant()) {
    bad(m.node()["g"], m.path("g"), "g must be a constant field");
  }
  p["u"] = signal_or(m, "u", 0.0);
  p["T"] = real(m, "T", 1.0, positive);
  p["h"] = real(m, "h", 1e-4, positive);
  p["tolerance"] = real(m, "tolerance", 1e-6, positive);
}

void load_rank(Map& m, ojson& p) {
  YAML::Node fs = m.required("fields");
  std::string fp = m.path("fields");
  if (!fs.IsSequence() || fs.size() == 0) bad(fs, fp, "expected a nonempty list of fields");
  std::size_t dim = 0;
  ojson fields = ojson::array();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    YAML::Node f = fs[i];
    std::string p_i = index(fp, i);
    if (!f.IsSequence() || f.size() == 0) bad(f, p_i, "expected a list of component polynomials");
    if (dim == 0) dim = f.size();
    if (f.size() != dim) bad(f, p_i, "all fields must have the same dimension");
    ojson comps = ojson::array();
    for (std::size_t k = 0; k < f.size(); ++k) {
      std::string s = as_string(f[k], index(p_i, k));
      validated(f[k], index(p_i, k), [&] { parse_poly(s, var_names(dim), {{"theta", Rational(1)}}); });
      comps.push_back(s);
    }
    fields.push_back(comps);
  }
  p["fields"] = fields;
  std::vector<double> th = as_reals(m.required("thetas"), m.path("thetas"));
  if (th.empty()) bad(m.node()["thetas"], m.path("thetas"), "must be nonempty");
  p["thetas"] = reals(th);
  YAML::Node pt = m.required("point");
  std::string pp = m.path("point");
  ojson points = ojson::array();
  if (pt.IsSequence() && pt.size() > 0 && pt[0].IsSequence()) {
    // A one element list is the shared point as echoed back.
    if (pt.size() != th.size() && pt.size() != 1) bad(pt, pp, "need one point per theta or a single shared point");
    for (std::size_t i = 0; i < pt.size(); ++i) points.push_back(reals(as_reals(pt[i], index(pp, i), dim)));
  } else {
    points.push_back(reals(as_reals(pt, pp, dim)));
  }
  p["point"] = points;
  p["depth"] = integer(m, "depth", std::nullopt, 1);
  p["tau_rank"] = real(m, "tau_rank", 1e-10, positive);
  if (m.has("expect_full")) {
    p["expect_full"] = as_bool(m.at("expect_full"), m.path("expect_full"));
  } else {
    m.at("expect_full");
    p["expect_full"] = nullptr;
  }
}

// ---------------------------------------------------------------- echo

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

bool scalar_list(const ojson& j) {
  for (const auto& x : j) {
    if (x.is_structured()) return false;
  }
  return true;
}

void emit(YAML::Emitter& out, const ojson& j) {
  if (j.is_object()) {
    out << YAML::BeginMap;
    for (auto it = j.begin(); it != j.end(); ++it) {
      out << YAML::Key << it.key() << YAML::Value;
      emit(out, it.value());
    }
    out << YAML::EndMap;
  } else if (j.is_array()) {
    if (scalar_list(j)) out << YAML::Flow;
    out << YAML::BeginSeq;
    for (const auto& x : j) emit(out, x);
    out << YAML::EndSeq;
  } else if (j.is_null()) {
    out << YAML::Null;
  } else if (j.is_boolean()) {
    out << j.get<bool>();
  } else if (j.is_number_integer()) {
    out << j.get<long long>();
  } else if (j.is_number_float()) {
    out << shortest(j.get<double>());
  } else {
    out << YAML::DoubleQuoted << j.get<std::string>();
  }
}

// ---------------------------------------------------------------- running

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

class Outputs {
 public:
  Outputs(std::string dir, std::string prefix) : dir_(std::move(dir)), prefix_(std::move(prefix)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + dir_ + ": " + ec.message());
  }

  void text(const std::string& name, const std::string& body) {
    std::string file = prefix_ + name;
    std::string path = (std::filesystem::path(dir_) / file).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
    out << body;
    out.close();
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + path);
    files_.push_back(file);
  }
  void json(const std::string& name, const ojson& j) { text(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }
  std::string path(const std::string& file) const { return (std::filesystem::path(dir_) / file).string(); }

 private:
  std::string dir_, prefix_;
  std::vector<std::string> files_;
};

std::string csv_num(double v) { return format_double(v); }

ojson num_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::vector<InertiaSpec> inertia_list(const ojson& p) {
  std::vector<InertiaSpec> Js;
  for (const auto& t : p["inertia"]) {
    Js.push_back(InertiaSpec::make({t[0].get<double>(), t[1].get<double>(), t[2].get<double>()},
                                   p["delta_J"].get<double>()));
  }
  return Js;
}

TorqueAxis torque(const ojson& L) { return TorqueAxis::make({L[0].get<double>(), L[1].get<double>(), L[2].get<double>()}); }

RunResult run_rigid_check(const ojson& p, Outputs& out) {
  auto Js = inertia_list(p);
  TorqueAxis L = torque(p["L"]);
  RNOptions o;
  o.tau = p["tau"].get<double>();
  o.tau0 = p["tau0"].get<double>();
  o.exact = p["exact"].get<bool>();
  RNReport r = build_RN(Js, L, o);
  const int N = static_cast<int>(Js.size());

  ojson rep;
  rep["N"] = N;
  rep["det"] = r.det;
  rep["scale"] = r.scale;
  rep["measure"] = r.measure;
  rep["cond"] = num_or_null(r.cond);
  rep["column_norm_product"] = r.column_norm_product;
  rep["verdict"] = verdict_name(r.verdict);
  if (o.exact) {
    std::vector<Rational> a;
    std::vector<std::vector<std::array<Rational, 3>>> chains;
    for (const auto& J : Js) chains.push_back(bracket_chain_exact(J, L, 3 * N - 1));
    for (int row = 0; row < 3 * N; ++row) {
      for (int col = 0; col < 3 * N; ++col) a.push_back(chains[row / 3][col][row % 3]);
    }
    rep["det_exact"] = rational_to_string(exact_determinant(a, 3 * N));
  }
  ojson chain = ojson::array();
  std::ostringstream csv;
  csv << "body,m,v1,v2,v3\n";
  for (int b = 0; b < N; ++b) {
    ojson vs = ojson::array();
    auto ch = bracket_chain(Js[b], L, 3 * N - 1);
    for (int k = 0; k < static_cast<int>(ch.size()); ++k) {
      vs.push_back(reals({ch[k](0), ch[k](1), ch[k](2)}));
      csv << b << "," << k << "," << csv_num(ch[k](0)) << "," << csv_num(ch[k](1)) << "," << csv_num(ch[k](2)) << "\n";
    }
    chain.push_back(vs);
  }
  rep["chain"] = chain;
  if (!p["scaling_eps"].is_null()) {
    double eps = p["scaling_eps"].get<double>();
    ScalingDiagnostic s = scaling_diagnostic(Js, L, eps, o.exact);
    rep["scaling"] = {{"eps", eps},
                      {"det_eps", s.det_eps},
                      {"det_limit_block", s.det_limit_block},
                      {"normalized_det_eps", s.normalized_det_eps}};
  }
  RunResult res;
  if (!p["expect"].is_null() && p["expect"].get<std::string>() != verdict_name(r.verdict)) {
    res.exit_code = 2;
    res.message = std::string("verdict ") + verdict_name(r.verdict) + " but " + p["expect"].get<std::string>() +
                  " was expected";
  }
  rep["status"] = res.exit_code == 0 ? "ok" : "failed";
  out.json("rigid_check.json", rep);
  out.text("rigid_chain.csv", csv.str());
  return res;
}

RunResult run_rigid_generic(const ojson& p, std::uint64_t seed, int threads, Outputs& out) {
  GenericityOptions o;
  o.box_lo = p["box"][0].get<double>();
  o.box_hi = p["box"][1].get<double>();
  o.min_gap = p["min_gap"].get<double>();
  if (!p["L"].is_null()) o.forced_L = torque(p["L"]);
  o.cross_checks = p["cross_checks"].get<int>();
  o.threads = threads;
  o.rn.tau = p["tau"].get<double>();
  o.rn.tau0 = p["tau0"].get<double>();
  const int N = p["N"].get<int>();
  GenericityResult g = genericity_mc(N, p["samples"].get<int>(), seed, o);

  std::ostringstream csv;
  csv << "index";
  for (int b = 0; b < N; ++b) csv << ",J" << b << "_1,J" << b << "_2,J" << b << "_3";
  csv << ",L1,L2,L3,measure,det,verdict\n";
  for (std::size_t i = 0; i < g.samples.size(); ++i) {
    const auto& s = g.samples[i];
    csv << i;
    for (const auto& J : s.Js) csv << "," << csv_num(J.J[0]) << "," << csv_num(J.J[1]) << "," << csv_num(J.J[2]);
    csv << "," << csv_num(s.L.L[0]) << "," << csv_num(s.L.L[1]) << "," << csv_num(s.L.L[2]) << ","
        << csv_num(s.report.measure) << "," << csv_num(s.report.det) << "," << verdict_name(s.report.verdict) << "\n";
  }
  ojson rep;
  rep["N"] = N;
  rep["samples"] = g.samples.size();
  rep["seed"] = seed;
  rep["fraction_generating"] = g.fraction_generating;
  rep["min_abs_scaled_det"] = g.min_abs_scaled_det;
  rep["cross_checked"] = g.cross_checked;
  rep["cross_check_mismatches"] = g.cross_check_mismatches;
  RunResult res;
  if (g.cross_check_mismatches > 0) {
    res.exit_code = 2;
    res.message = "exact cross-check disagrees on " + std::to_string(g.cross_check_mismatches) + " samples";
  } else if (!p["min_fraction"].is_null() && g.fraction_generating < p["min_fraction"].get<double>()) {
    res.exit_code = 2;
    res.message = "fraction_generating " + format_double(g.fraction_generating) + " below min_fraction";
  }
  rep["status"] = res.exit_code == 0 ? "ok" : "failed";
  out.json("rigid_generic.json", rep);
  out.text("rigid_generic_samples.csv", csv.str());
  return res;
}

RunResult run_model(const ojson& p, Outputs& out) {
  ModelScenario sc;
  sc.f = parse_expr(p["f_theta"].get<std::string>());
  sc.target = parse_expr(p["target"].get<std::string>());
  sc.grid = build_grid(p["grid"]);
  sc.eps1 = p["eps1"].get<double>();
  sc.rho = p["rho"].get<double>();
  sc.mu_f = p["mu_f"].get<double>();
  if (!p["R"].is_null()) sc.R = p["R"].get<int>();
  sc.R_max = p["R_max"].get<int>();
  if (sc.R && *sc.R > sc.R_max) sc.R_max = *sc.R;
  sc.eps_floor = p["eps_floor"].get<double>();
  sc.ode_tolerance = p["ode_tolerance"].get<double>();
  sc.terminal_state_tolerance = p["terminal_state_tolerance"].get<double>();
  sc.terminal.ode_check = p["ode_check"].get<bool>();
  sc.terminal.quad_tol = p["quad_tol"].get<double>();
  sc.terminal.extra_digits = p["extra_digits"].get<int>();
  SynthesisReport r = verify_model(sc);

  ojson rep;
  rep["ok"] = r.ok;
  rep["failed_stage"] = r.failed_stage.empty() ? ojson(nullptr) : ojson(r.failed_stage);
  rep["message"] = r.message;
  rep["R"] = r.R;
  rep["eps1"] = r.eps1;
  rep["eps"] = r.eps;
  rep["c"] = reals(r.c);
  rep["y"] = reals(r.y);
  rep["b_y"] = r.b_y;
  rep["residual_by_R"] = reals(r.residual_by_R);
  rep["projection_residual"] = r.projection_residual;
  rep["terminal_error"] = r.terminal_error;
  rep["bound_2eps1"] = r.bound_2eps1;
  rep["perturbation_bound"] = r.perturbation_bound;
  rep["decomposition_ok"] = r.decomposition_ok;
  rep["mu_f_observed"] = r.mu_f_observed;
  rep["digits"] = r.terminal.digits;
  rep["quad_points"] = r.terminal.quad_points;
  rep["ode_levels"] = r.terminal.ode_levels;
  rep["max_ode_gap"] = r.terminal.max_ode_gap;
  if (r.controls) {
    auto coeffs = [](const ControlSignal& s) {
      ojson a = ojson::array();
      for (const auto& c : s.poly_coeffs()) a.push_back(c.get_d());
      return a;
    };
    rep["controls"] = {{"u", coeffs(r.controls->u)}, {"v", coeffs(r.controls->v)}};
  }
  out.json("model_synthesize.json", rep);

  if (!r.terminal.z_quad.empty()) {
    std::ostringstream csv;
    csv << "theta,weight,target,z_quad,z_ode,x1,y1\n";
    for (std::size_t i = 0; i < sc.grid.size(); ++i) {
      auto at = [&](const std::vector<double>& v) { return i < v.size() ? csv_num(v[i]) : std::string(); };
      csv << csv_num(sc.grid.nodes[i]) << "," << csv_num(sc.grid.weights[i]) << "," << at(r.z_target) << ","
          << at(r.terminal.z_quad) << "," << at(r.terminal.z_ode) << "," << at(r.terminal.x1) << ","
          << at(r.terminal.y1) << "\n";
    }
    out.text("model_terminal.csv", csv.str());
  }
  if (r.controls) {
    // Controls on [0, T]: time compressed by k = 1 / T and amplitudes scaled by k,
    // which leaves the terminal state unchanged.
    const double T = p["T"].get<double>();
    const int ns = p["control_samples"].get<int>();
    std::ostringstream csv;
    csv << "t,u,v\n";
    for (int i = 0; i < ns; ++i) {
      double s = static_cast<double>(i) / (ns - 1);
      csv << csv_num(s * T) << "," << csv_num(r.controls->u(s) / T) << "," << csv_num(r.controls->v(s) / T) << "\n";
    }
    out.text("model_controls.csv", csv.str());
  }
  RunResult res;
  if (!r.ok) {
    res.exit_code = 2;
    res.message = r.failed_stage + ": " + r.message;
  }
  return res;
}

RunResult run_reduce(const ojson& p, Outputs& out) {
  const double T = p["T"].get<double>();
  ReductionPlan plan = reduce_controls(build_signal(p["u_e"]), build_signal(p["v_e"]), build_signal(p["w_e"]), T,
                                       p["n"].get<int>());
  const long m = p["samples"].get<long>();
  std::ostringstream csv;
  csv << "t,u_eps,v_eps,U_eps,vhat\n";
  for (long k = 0; k < m; ++k) {
    double t = k == m - 1 ? T : T * static_cast<double>(k) / static_cast<double>(m - 1);
    csv << csv_num(t) << "," << csv_num(plan.u_eps(t)) << "," << csv_num(plan.v_eps(t)) << ","
        << csv_num(plan.U_eps(t)) << "," << csv_num(plan.vhat(t)) << "\n";
  }
  const double pi = 3.141592653589793;
  ojson rep;
  rep["T"] = T;
  rep["n"] = plan.n;
  rep["eps"] = plan.eps;
  rep["eps_identity_error"] = std::abs(plan.eps * plan.eps * pi * plan.n / T - 1.0);
  rep["U_eps_T"] = plan.U_eps(T);
  rep["step"] = plan.eps * plan.eps / 40.0;
  out.text("lieext_reduce.csv", csv.str());
  out.json("lieext_reduce.json", rep);
  return {};
}

RunResult run_converge(const ojson& p, Outputs& out) {
  ThetaGrid grid = build_grid(p["grid"]);
  const std::size_t dim = p["x0"].size();
  std::vector<std::vector<PolyField>> ens;
  for (double th : grid.nodes) ens.push_back({build_field(p["X"], dim, th), build_field(p["Y"], dim, th)});
  ConvergenceOptions o;
  o.h_ref = p["h_ref"].get<double>();
  o.step_ratio = p["step_ratio"].get<double>();
  std::vector<int> ns;
  for (const auto& n : p["n_list"]) ns.push_back(n.get<int>());
  ConvergenceStudy cs = convergence_study(ens, grid, build_signal(p["u_e"]), build_signal(p["v_e"]),
                                          build_signal(p["w_e"]), to_reals(p["x0"]), p["T"].get<double>(), ns, o);
  std::ostringstream csv;
  csv << "n,eps_n,e_n,U_eps_T,h\n";
  bool decreasing = true;
  for (std::size_t k = 0; k < cs.n.size(); ++k) {
    csv << cs.n[k] << "," << csv_num(cs.eps[k]) << "," << csv_num(cs.errors[k]) << "," << csv_num(cs.U_eps_T[k])
        << "," << csv_num(cs.steps[k]) << "\n";
    if (k > 0 && !(cs.errors[k] < cs.errors[k - 1])) decreasing = false;
  }
  ojson rep;
  rep["n"] = cs.n;
  rep["eps_n"] = reals(cs.eps);
  rep["e_n"] = reals(cs.errors);
  rep["U_eps_T"] = reals(cs.U_eps_T);
  rep["slope"] = num_or_null(cs.slope);
  rep["strictly_decreasing"] = decreasing;
  RunResult res;
  if (p["require_decreasing"].get<bool>() && !decreasing) {
    res.exit_code = 2;
    res.message = "e_n is not strictly decreasing";
  }
  if (!p["slope_range"].is_null()) {
    double lo = p["slope_range"][0].get<double>(), hi = p["slope_range"][1].get<double>();
    if (!(cs.slope >= lo && cs.slope <= hi)) {
      res.exit_code = 2;
      res.message = "slope " + format_double(cs.slope) + " outside [" + format_double(lo) + ", " + format_double(hi) + "]";
    }
  }
  rep["status"] = res.exit_code == 0 ? "ok" : "failed";
  out.text("lieext_converge.csv", csv.str());
  out.json("lieext_converge.json", rep);
  return res;
}

RunResult run_flow(const ojson& p, Outputs& out) {
  const std::size_t dim = p["x0"].size();
  FlowDecomposition fd = flow_decomposition_check(build_field(p["f"], dim, std::nullopt),
                                                  build_field(p["g"], dim, std::nullopt), build_signal(p["u"]),
                                                  to_reals(p["x0"]), p["T"].get<double>(), p["h"].get<double>());
  const double tol = p["tolerance"].get<double>();
  ojson rep;
  rep["lhs_endpoint"] = reals(fd.lhs_endpoint);
  rep["rhs_endpoint"] = reals(fd.rhs_endpoint);
  rep["gap"] = fd.gap;
  rep["tolerance"] = tol;
  RunResult res;
  if (!(fd.gap < tol)) {
    res.exit_code = 2;
    res.message = "flow decomposition gap " + format_double(fd.gap) + " exceeds tolerance";
  }
  rep["status"] = res.exit_code == 0 ? "ok" : "failed";
  out.json("flow_verify.json", rep);
  return res;
}

RunResult run_rank(const ojson& p, Outputs& out) {
  const std::size_t dim = p["fields"][0].size();
  std::vector<std::vector<PolyField>> ens;
  for (const auto& th : p["thetas"]) {
    std::vector<PolyField> sys;
    for (const auto& f : p["fields"]) sys.push_back(build_field(f, dim, th.get<double>()));
    ens.push_back(std::move(sys));
  }
  std::vector<std::vector<double>> pts;
  for (const auto& pt : p["point"]) pts.push_back(to_reals(pt));
  RankResult r = product_bracket_rank(ens, pts, p["depth"].get<int>(), p["tau_rank"].get<double>());
  ojson rep;
  rep["rank"] = r.rank;
  rep["rows"] = r.rows;
  rep["full"] = r.full;
  rep["bracket_count"] = r.bracket_count;
  rep["singular_values"] = reals(r.singular_values);
  RunResult res;
  if (!p["expect_full"].is_null() && p["expect_full"].get<bool>() != r.full) {
    res.exit_code = 2;
    res.message = std::string("rank condition ") + (r.full ? "holds" : "fails") + " contrary to expect_full";
  }
  rep["status"] = res.exit_code == 0 ? "ok" : "failed";
  out.json("rank_check.json", rep);
  return res;
}

}  // namespace

ScenarioConfig parse_config(const std::string& yaml_text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::kConfig, source + ":" + std::to_string(e.mark.line + 1) + ":" +
                                        std::to_string(e.mark.column + 1) + ": parse error: " + e.msg);
  }
  if (!root.IsMap()) throw Error(ErrorKind::kConfig, source + ": top level must be a mapping");
  Map m(root, "");
  ScenarioConfig cfg;
  cfg.kind = as_string(m.required("kind"), "kind");
  const auto& kinds = scenario_kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end()) {
    bad(root["kind"], "kind", "unknown scenario kind '" + cfg.kind + "'");
  }
  ojson& p = cfg.params;
  p["kind"] = cfg.kind;
  if (m.has("name")) {
    p["name"] = as_string(m.at("name"), "name");
  } else {
    m.at("name");
    p["name"] = cfg.kind;
  }
  p["seed"] = integer(m, "seed", 0, 0);
  if (m.has("output_prefix")) {
    p["output_prefix"] = as_string(m.at("output_prefix"), "output_prefix");
  } else {
    m.at("output_prefix");
    p["output_prefix"] = "";
  }
  if (cfg.kind == "rigid-check") load_rigid_check(m, p);
  else if (cfg.kind == "rigid-generic") load_rigid_generic(m, p);
  else if (cfg.kind == "model-synthesize") load_model(m, p);
  else if (cfg.kind == "lieext-reduce") load_reduce(m, p);
  else if (cfg.kind == "lieext-converge") load_converge(m, p);
  else if (cfg.kind == "flow-verify") load_flow(m, p);
  else load_rank(m, p);
  m.finish();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string echo_yaml(const ScenarioConfig& config) {
  YAML::Emitter out;
  out.SetIndent(2);
  emit(out, config.params);
  return std::string(out.c_str()) + "\n";
}

std::string sha256_file(const std::string& path) { return file_sha256(path); }

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  auto t0 = std::chrono::steady_clock::now();
  ojson p = config.params;
  std::uint64_t seed = options.seed_override ? *options.seed_override : p["seed"].get<std::uint64_t>();
  p["seed"] = seed;
  Outputs out(options.out_dir, p["output_prefix"].get<std::string>());
  const std::string& k = config.kind;
  RunResult res;
  if (k == "rigid-check") res = run_rigid_check(p, out);
  else if (k == "rigid-generic") res = run_rigid_generic(p, seed, std::max(1, options.threads), out);
  else if (k == "model-synthesize") res = run_model(p, out);
  else if (k == "lieext-reduce") res = run_reduce(p, out);
  else if (k == "lieext-converge") res = run_converge(p, out);
  else if (k == "flow-verify") res = run_flow(p, out);
  else if (k == "rank-check") res = run_rank(p, out);
  else throw Error(ErrorKind::kConfig, "unknown scenario kind '" + k + "'");

  ScenarioConfig echoed{k, p};
  out.text("config_echo.yaml", echo_yaml(echoed));

  ojson manifest;
  manifest["artifact"] = "ensctl";
  manifest["version"] = ENSCTL_VERSION;
  manifest["kind"] = k;
  manifest["seed"] = seed;
  manifest["exit_code"] = res.exit_code;
  manifest["config"] = p;
  ojson files = ojson::array();
  for (const auto& f : out.files()) {
    files.push_back({{"file", f},
                     {"sha256", file_sha256(out.path(f))},
                     {"bytes", std::filesystem::file_size(out.path(f))}});
  }
  manifest["outputs"] = files;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.outputs = out.files();
  out.json("manifest.json", manifest);
  res.outputs.push_back(p["output_prefix"].get<std::string>() + "manifest.json");
  return res;
}

}  // namespace ensctl
