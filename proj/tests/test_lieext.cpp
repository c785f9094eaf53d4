#include <cmath>
#include <random>

#include "doctest.h"
#include "lieext.hpp"
#include "odesim.hpp"

using namespace ensctl;

namespace {

PolyField field(const std::vector<std::string>& comps, const std::string& theta = "") {
  auto names = default_var_names(comps.size());
  std::map<std::string, Rational> bind;
  if (!theta.empty()) bind["theta"] = parse_rational(theta);
  std::vector<Poly> ps;
  for (const auto& c : comps) ps.push_back(parse_poly(c, names, bind));
  return PolyField(std::move(ps));
}

std::vector<std::vector<PolyField>> toy(const ThetaGrid& g) {
  std::vector<std::vector<PolyField>> e;
  for (double th : g.nodes) {
    Rational q = to_rational(th);
    e.push_back({field({"1", "0", "0"}),
                 PolyField({Poly::constant(3, 0), Poly::constant(3, 1), Poly::variable(3, 0) * q})});
  }
  return e;
}

}  // namespace

TEST_CASE("reduction plan") {
  ControlSignal w = ControlSignal::polynomial(std::vector<double>{1.0, -0.5, 0.25});
  for (int n : {1, 3, 8, 40}) {
    ReductionPlan plan = reduce_controls(ControlSignal(), ControlSignal(), w, 1.0, n);
    CHECK(std::abs(plan.eps * plan.eps * 3.141592653589793 * n - 1.0) < 1e-15);
    CHECK(std::abs(plan.U_eps(1.0)) < 1e-15);
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 100; ++k) {
      double t = u(rng);
      double want = w(t) - w(t) * std::cos(2 * t / (plan.eps * plan.eps));
      CHECK(std::abs(plan.U_eps(t) * plan.vhat(t) - want) < 1e-12);
    }
  }
  ReductionPlan p2 = reduce_controls(ControlSignal(), ControlSignal(), w, 2.5, 7);
  CHECK(std::abs(p2.U_eps(2.5)) < 1e-15);
}

TEST_CASE("reduction with no bracket term") {
  ControlSignal ue = ControlSignal::polynomial(std::vector<double>{0.3, 1});
  ControlSignal ve = ControlSignal::constant(-0.2);
  ReductionPlan plan = reduce_controls(ue, ve, ControlSignal(), 1.0, 5);
  for (double t : {0.0, 0.17, 0.5, 0.93}) {
    CHECK(plan.u_eps(t) == doctest::Approx(ue(t)));
    CHECK(plan.v_eps(t) == doctest::Approx(ve(t) + std::sin(t / (plan.eps * plan.eps)) / plan.eps));
  }
  CHECK_THROWS_AS(reduce_controls(ue, ve, ControlSignal::sampled({0, 1}, {0, 1}), 1.0, 5), Error);
  CHECK_THROWS_AS(reduce_controls(ue, ve, ControlSignal(), 1.0, 0), Error);
}

TEST_CASE("u_eps carries the derivative of U_eps") {
  ControlSignal w = ControlSignal::polynomial(std::vector<double>{1.0, 2.0});
  ReductionPlan plan = reduce_controls(ControlSignal(), ControlSignal(), w, 1.0, 6);
  double h = 1e-7;
  for (double t : {0.1, 0.45, 0.8}) {
    double d = (plan.U_eps(t + h) - plan.U_eps(t - h)) / (2 * h);
    CHECK(plan.u_eps(t) == doctest::Approx(plan.eps * d).epsilon(1e-5));
  }
}

TEST_CASE("oscillation primitive shrinks with eps") {
  // Primitive of w(t) eps^-1 sin(t / eps^2) with w(t) = 1 + t.
  auto sup_primitive = [](double eps) {
    double acc = 0, best = 0, t = 0;
    const double h = eps * eps / 200;
    auto g = [&](double s) { return (1 + s) * std::sin(s / (eps * eps)) / eps; };
    while (t < 1) {
      acc += h / 6 * (g(t) + 4 * g(t + h / 2) + g(t + h));
      t += h;
      best = std::max(best, std::abs(acc));
    }
    return best;
  };
  double a = sup_primitive(0.1), b = sup_primitive(0.05);
  CHECK(a / b == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("flow decomposition trivial cases") {
  PolyField f = field({"x2", "-x1"}), g = field({"0", "1"});
  auto zero = flow_decomposition_check(f, g, ControlSignal(), {1, 0.5}, 1.0);
  CHECK(zero.gap < 1e-10);
  auto tr = flow_decomposition_check(PolyField::zero(2), g, ControlSignal::polynomial(std::vector<double>{0, 3}),
                                     {1, 0.5}, 1.0);
  CHECK(tr.gap < 1e-12);
  CHECK(tr.lhs_endpoint[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(flow_decomposition_check(f, field({"x1", "1"}), ControlSignal(), {0, 0}, 1.0), Error);
}

TEST_CASE("flow decomposition on the planar example") {
  PolyField f = field({"x2", "0"}), g = field({"0", "1"});
  // cos(2 pi t) written as sin(pi (2 t + 1/2)).
  ControlSignal u = ControlSignal::sinusoid(1.0, 2.0, 0.5, ControlSignal::constant(1.0));
  auto r = flow_decomposition_check(f, g, u, {0, 0}, 1.0, 1e-4);
  CHECK(r.gap < 1e-6);
  // Closed form: x2 = sin(2 pi t) / (2 pi), x1 = (1 - cos(2 pi t)) / (4 pi^2).
  CHECK(std::abs(r.lhs_endpoint[0]) < 1e-12);
  CHECK(std::abs(r.lhs_endpoint[1]) < 1e-12);
  auto half = flow_decomposition_check(f, g, u, {0, 0}, 0.25, 1e-4);
  double pi = 3.141592653589793;
  CHECK(half.lhs_endpoint[0] == doctest::Approx(1 / (4 * pi * pi)).epsilon(1e-10));
  CHECK(half.rhs_endpoint[1] == doctest::Approx(1 / (2 * pi)).epsilon(1e-10));
}

TEST_CASE("flow decomposition with a nonlinear drift") {
  PolyField f = field({"x2^2", "x1"}), g = field({"0.5", "1"});
  ControlSignal u = ControlSignal::polynomial(std::vector<double>{1, -2, 0.5});
  auto a = flow_decomposition_check(f, g, u, {0.1, -0.2}, 1.0, 1e-2);
  auto b = flow_decomposition_check(f, g, u, {0.1, -0.2}, 1.0, 5e-3);
  CHECK(a.gap < 1e-6);
  CHECK(b.gap <= a.gap);
}

TEST_CASE("extended steering on the Heisenberg system") {
  ThetaGrid one = make_grid(GridKind::kGauss, 0, 1, 1);
  std::vector<std::vector<PolyField>> ens{{field({"1", "0", "0"}), field({"0", "1", "x1"})}};
  ExtendedSteer r = extended_steer(ens, one, field({"0", "0", "1"}), {0, 0, 0}, 1.0, 2, 11);
  CHECK(r.max_residual < 1e-10);
  CHECK(r.dense_residual < 1e-10);
  bool found = false;
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    if (r.labels[k] == std::vector<int>{0, 1}) {
      found = true;
      for (double t : {0.0, 0.4, 1.0}) CHECK(r.v_alpha[k](t) == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
  CHECK(found);
  CHECK(r.terminal_error < 1e-10);

  ExtendedSteer shallow = extended_steer(ens, one, field({"0", "0", "1"}), {0, 0, 0}, 1.0, 1, 11);
  CHECK(shallow.max_residual > 0.5);
}

TEST_CASE("extended steering on a theta family") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 9);
  std::vector<std::vector<PolyField>> ens;
  for (double th : g.nodes) {
    std::string s = format_double(th);
    ens.push_back({field({"1", "0", "0"}), field({"0", "1", "theta*x1 + theta^2*x1^2/2"}, s)});
  }
  SteerOptions o;
  o.eps = 1e-3;
  ExtendedSteer r = extended_steer(ens, g, field({"1", "x1", "0"}), {0, 0, 0}, 1.0, 3, 21, o);
  CHECK(r.max_residual < o.eps);
  CHECK(r.deficient.empty());
  CHECK(r.terminal_error <= r.gronwall_bound);
  CHECK(r.gronwall_ok);
  CHECK_THROWS_AS(extended_steer(ens, make_grid(GridKind::kGauss, 0, 1, 3), field({"1", "0", "0"}), {0, 0, 0},
                                 1.0, 2, 5),
                  Error);
}

TEST_CASE("convergence study without a bracket term") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 16);
  ConvergenceStudy cs = convergence_study(toy(g), g, ControlSignal(), ControlSignal(), ControlSignal(), {0, 0, 0},
                                          1.0, {8, 16});
  for (double e : cs.errors) CHECK(e < 1e-3);
  for (double u : cs.U_eps_T) CHECK(u < 1e-15);
}

TEST_CASE("convergence study guards") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 4);
  ConvergenceOptions coarse;
  coarse.step_ratio = 10;
  CHECK_THROWS_AS(convergence_study(toy(g), g, ControlSignal(), ControlSignal(), ControlSignal::constant(1.0),
                                    {0, 0, 0}, 1.0, {4}, coarse),
                  Error);
  CHECK_THROWS_AS(convergence_study(toy(g), g, ControlSignal(), ControlSignal(), ControlSignal::constant(1.0),
                                    {0, 0, 0}, 1.0, {8, 4}),
                  Error);
}

TEST_CASE("reference endpoint is step independent") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 4);
  ConvergenceOptions a, b;
  b.h_ref = a.h_ref / 2;
  auto ca = convergence_study(toy(g), g, ControlSignal(), ControlSignal(), ControlSignal::constant(1.0), {0, 0, 0},
                              1.0, {4}, a);
  auto cb = convergence_study(toy(g), g, ControlSignal(), ControlSignal(), ControlSignal::constant(1.0), {0, 0, 0},
                              1.0, {4}, b);
  REQUIRE(ca.reference_end.size() == cb.reference_end.size());
  for (std::size_t i = 0; i < ca.reference_end.size(); ++i) {
    CHECK(std::abs(ca.reference_end[i] - cb.reference_end[i]) < 1e-9);
  }
}
