#include "ensctl.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "expr.hpp"
#include "poly.hpp"
#include "rigidbody.hpp"
#include "scenario.hpp"

struct ensctl_scenario {
  ensctl::ScenarioConfig config;
};

struct ensctl_field {
  ensctl::PolyField field;
};

struct ensctl_expr {
  ensctl::Expr expr;
};

namespace {

thread_local std::string g_last_error;

ensctl_status status_of(ensctl::ErrorKind k) {
  using ensctl::ErrorKind;
  switch (k) {
    case ErrorKind::kInvalidArgument: return ENSCTL_E_INVALID_ARGUMENT;
    case ErrorKind::kDimensionMismatch: return ENSCTL_E_DIMENSION_MISMATCH;
    case ErrorKind::kUnsupportedInput: return ENSCTL_E_UNSUPPORTED_INPUT;
    case ErrorKind::kDomain: return ENSCTL_E_DOMAIN;
    case ErrorKind::kSyntax: return ENSCTL_E_SYNTAX;
    case ErrorKind::kDegenerate: return ENSCTL_E_DEGENERATE;
    case ErrorKind::kInfeasible: return ENSCTL_E_INFEASIBLE;
    case ErrorKind::kAccuracy: return ENSCTL_E_ACCURACY;
    case ErrorKind::kDivergence: return ENSCTL_E_DIVERGENCE;
    case ErrorKind::kConfig: return ENSCTL_E_CONFIG;
    case ErrorKind::kIo: return ENSCTL_E_IO;
  }
  return ENSCTL_E_INTERNAL;
}

template <class F>
ensctl_status guarded(const F& f) {
  try {
    f();
    g_last_error.clear();
    return ENSCTL_OK;
  } catch (const ensctl::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ENSCTL_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return ENSCTL_E_INTERNAL;
  }
}

ensctl_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return ENSCTL_E_NULL_ARGUMENT;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* ensctl_version(void) { return ENSCTL_VERSION; }

const char* ensctl_status_name(ensctl_status status) {
  switch (status) {
    case ENSCTL_OK: return "ok";
    case ENSCTL_E_INVALID_ARGUMENT: return "invalid_argument";
    case ENSCTL_E_DIMENSION_MISMATCH: return "dimension_mismatch";
    case ENSCTL_E_UNSUPPORTED_INPUT: return "unsupported_input";
    case ENSCTL_E_DOMAIN: return "domain";
    case ENSCTL_E_SYNTAX: return "syntax";
    case ENSCTL_E_DEGENERATE: return "degenerate";
    case ENSCTL_E_INFEASIBLE: return "infeasible";
    case ENSCTL_E_ACCURACY: return "accuracy";
    case ENSCTL_E_DIVERGENCE: return "divergence";
    case ENSCTL_E_CONFIG: return "config";
    case ENSCTL_E_IO: return "io";
    case ENSCTL_E_NULL_ARGUMENT: return "null_argument";
    case ENSCTL_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ensctl_last_error(void) { return g_last_error.c_str(); }

void ensctl_string_free(char* s) { std::free(s); }

ensctl_status ensctl_scenario_load(const char* path, ensctl_scenario** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ensctl_scenario{ensctl::load_config(path)}; });
}

ensctl_status ensctl_scenario_parse(const char* yaml, ensctl_scenario** out) {
  if (!yaml) return null_arg("yaml");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ensctl_scenario{ensctl::parse_config(yaml)}; });
}

void ensctl_scenario_free(ensctl_scenario* s) { delete s; }

const char* ensctl_scenario_kind(const ensctl_scenario* s) { return s ? s->config.kind.c_str() : ""; }

ensctl_status ensctl_scenario_echo(const ensctl_scenario* s, char** yaml_out) {
  if (!s) return null_arg("scenario");
  if (!yaml_out) return null_arg("yaml_out");
  return guarded([&] { *yaml_out = dup(ensctl::echo_yaml(s->config)); });
}

ensctl_status ensctl_scenario_run(const ensctl_scenario* s, const char* out_dir, int has_seed, uint64_t seed,
                                  int threads, int* exit_code, char** message_out) {
  if (!s) return null_arg("scenario");
  if (!exit_code) return null_arg("exit_code");
  return guarded([&] {
    ensctl::RunOptions o;
    if (out_dir) o.out_dir = out_dir;
    if (has_seed) o.seed_override = seed;
    o.threads = threads;
    ensctl::RunResult r = ensctl::run_scenario(s->config, o);
    *exit_code = r.exit_code;
    if (message_out) *message_out = dup(r.message);
  });
}

ensctl_status ensctl_field_parse(const char* const* components, size_t dim, const char* theta,
                                 ensctl_field** out) {
  if (!components) return null_arg("components");
  if (!out) return null_arg("out");
  return guarded([&] {
    std::map<std::string, ensctl::Rational> bind;
    if (theta) bind["theta"] = ensctl::parse_rational(theta);
    auto names = ensctl::default_var_names(dim);
    std::vector<ensctl::Poly> ps;
    for (size_t i = 0; i < dim; ++i) {
      if (!components[i]) throw ensctl::Error(ensctl::ErrorKind::kInvalidArgument, "null component");
      ps.push_back(ensctl::parse_poly(components[i], names, bind));
    }
    *out = new ensctl_field{ensctl::PolyField(std::move(ps))};
  });
}

void ensctl_field_free(ensctl_field* f) { delete f; }

size_t ensctl_field_dim(const ensctl_field* f) { return f ? f->field.dim() : 0; }

ensctl_status ensctl_field_bracket(const ensctl_field* x, const ensctl_field* y, ensctl_field** out) {
  if (!x || !y) return null_arg("field");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ensctl_field{ensctl::lie_bracket(x->field, y->field)}; });
}

ensctl_status ensctl_field_eval(const ensctl_field* f, const double* x, double* out) {
  if (!f) return null_arg("field");
  if (!x || !out) return null_arg("x/out");
  return guarded([&] {
    std::vector<double> v = f->field.eval(std::vector<double>(x, x + f->field.dim()));
    std::copy(v.begin(), v.end(), out);
  });
}

ensctl_status ensctl_field_divergence_is_zero(const ensctl_field* f, int* out) {
  if (!f) return null_arg("field");
  if (!out) return null_arg("out");
  return guarded([&] { *out = ensctl::divergence(f->field).is_zero() ? 1 : 0; });
}

ensctl_status ensctl_field_to_string(const ensctl_field* f, char** out) {
  if (!f) return null_arg("field");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup(f->field.to_string()); });
}

ensctl_status ensctl_expr_parse(const char* src, ensctl_expr** out) {
  if (!src) return null_arg("src");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ensctl_expr{ensctl::parse_expr(src)}; });
}

void ensctl_expr_free(ensctl_expr* e) { delete e; }

ensctl_status ensctl_expr_eval(const ensctl_expr* e, double x, double theta, double* out) {
  if (!e) return null_arg("expr");
  if (!out) return null_arg("out");
  return guarded([&] { *out = ensctl::eval_expr<double>(e->expr, x, theta); });
}

ensctl_status ensctl_expr_taylor(const ensctl_expr* e, double theta, int M, double* coeffs) {
  if (!e) return null_arg("expr");
  if (!coeffs) return null_arg("coeffs");
  return guarded([&] {
    ensctl::TaylorJet jet = ensctl::taylor_coeffs(e->expr, theta, M);
    std::copy(jet.coeffs.begin(), jet.coeffs.end(), coeffs);
  });
}

ensctl_status ensctl_expr_serialize(const ensctl_expr* e, char** out) {
  if (!e) return null_arg("expr");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup(ensctl::serialize(e->expr)); });
}

ensctl_status ensctl_rigid_rn(const double* J, size_t N, const double* L, int exact, double* det,
                              double* measure, ensctl_verdict* verdict) {
  if (!J || !L) return null_arg("J/L");
  return guarded([&] {
    std::vector<ensctl::InertiaSpec> Js;
    for (size_t b = 0; b < N; ++b) Js.push_back(ensctl::InertiaSpec::make({J[3 * b], J[3 * b + 1], J[3 * b + 2]}));
    ensctl::RNOptions o;
    o.exact = exact != 0;
    ensctl::RNReport r = ensctl::build_RN(Js, ensctl::TorqueAxis::make({L[0], L[1], L[2]}), o);
    if (det) *det = r.det;
    if (measure) *measure = r.measure;
    if (verdict) {
      *verdict = r.verdict == ensctl::Verdict::kGenerating ? ENSCTL_GENERATING
                 : r.verdict == ensctl::Verdict::kSingular ? ENSCTL_SINGULAR
                                                           : ENSCTL_BORDERLINE;
    }
  });
}

}  // extern "C"
