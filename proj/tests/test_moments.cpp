#include <cmath>
#include <random>

#include "doctest.h"
#include "moments.hpp"

using namespace ensctl;

namespace {

// Exact integral over [0, 1] of a univariate polynomial, term by term.
Rational integral01(const Poly& p) {
  Rational s = 0;
  for (const auto& [ex, c] : p.terms()) s += c / Rational(static_cast<long>(ex[0]) + 1);
  return s;
}

Eigen::MatrixXd taylor_matrix(const Expr& f, const ThetaGrid& g, int M) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(g.size()), M);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto jet = taylor_coeffs(f, g.nodes[i], M).coeffs;
    for (int m = 1; m <= M; ++m) a(static_cast<Eigen::Index>(i), m - 1) = jet[m];
  }
  return a;
}

double wnorm(const std::vector<double>& z, const ThetaGrid& g) {
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * z[i] * z[i];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("Legendre family") {
  CHECK(legendre(0) == Poly::constant(1, 1));
  CHECK(legendre(2) == parse_poly("6*t^2 - 6*t + 1", {"t"}));
  CHECK(integral01(legendre(2) * legendre(4)) == 0);
  for (int k = 0; k <= 10; ++k) CHECK(legendre(k).total_degree() == k);
  CHECK_THROWS_AS(legendre(-1), Error);
  // Norm of the Rodrigues form: 1 / (2k + 1).
  for (int k = 0; k <= 8; ++k) CHECK(integral01(legendre(k) * legendre(k)) == Rational(1, 2 * k + 1));
}

TEST_CASE("moment values") {
  CHECK(gamma_moment(1, 2) == 0);
  CHECK(gamma_moment(1, 1) == Rational(1, 30));
  // Independent route: integral of t^2 P_2.
  Poly t = Poly::variable(1, 0);
  CHECK(integral01(t * t * legendre(2)) == Rational(1, 30));
  for (int m = 1; m <= 12; ++m) {
    for (int r = 1; r <= 6; ++r) {
      Rational g = gamma_moment(m, r);
      CHECK(abs(g) < Rational(1, 8));
      if (m < r) CHECK(g == 0);
      if (m == r) CHECK(g != 0);
      CHECK(g == integral01((t * t - t).pow(m) * legendre(2 * r)));
    }
  }
  CHECK_THROWS_AS(gamma_moment(0, 1), Error);
}

TEST_CASE("scaled moment matrix") {
  GammaMatrix g = gamma_matrix(8, 4);
  GammaMatrix ge = gamma_matrix(8, 4, Rational(1, 3));
  for (int m = 1; m <= 8; ++m) {
    for (int r = 1; r <= 4; ++r) {
      CHECK(g.at(m, r) == gamma_moment(m, r));
      Rational f = 1;
      for (int k = 0; k < std::abs(m - r); ++k) f *= Rational(1, 3);
      CHECK(ge.at(m, r) == (m >= r ? Rational(g.at(m, r) * f) : Rational(g.at(m, r) / f)));
    }
  }
}

TEST_CASE("projection onto a member of the span") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 64);
  Eigen::MatrixXd a = taylor_matrix(parse_expr("exp(theta*x)-1"), g, 6);
  std::vector<double> z(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) z[i] = a(static_cast<Eigen::Index>(i), 1);
  Projection p = project_target(a, z, g, 4);
  CHECK(p.residual <= 1e-10);
  CHECK(std::abs(p.c[0]) < 1e-8);
  CHECK(p.c[1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(p.c[2]) < 1e-7);
  CHECK(std::abs(p.c[3]) < 1e-6);
}

TEST_CASE("projection of an orthogonal target") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 32);
  Eigen::MatrixXd a = taylor_matrix(parse_expr("sin(theta*x)"), g, 5);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(static_cast<Eigen::Index>(g.size()));
  for (auto& v : z) v = nd(rng);
  // Modified Gram-Schmidt in the weighted inner product, twice.
  auto ip = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += g.weights[i] * x[i] * y[i];
    return s;
  };
  std::vector<Eigen::VectorXd> q;
  for (int j = 0; j < a.cols(); ++j) {
    Eigen::VectorXd v = a.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : q) v -= ip(u, v) * u;
    }
    double nv = std::sqrt(ip(v, v));
    if (nv > 1e-14) q.push_back(v / nv);
  }
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& u : q) z -= ip(u, z) * u;
  }
  std::vector<double> zv(z.data(), z.data() + z.size());
  Projection p = project_target(a, zv, g, static_cast<int>(a.cols()));
  CHECK(std::abs(p.residual - wnorm(zv, g)) < 1e-9);
}

TEST_CASE("projection matches a normal-equations oracle") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 64);
  Eigen::MatrixXd a = taylor_matrix(parse_expr("exp(theta*x)-1"), g, 6);
  std::vector<double> z(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) z[i] = std::sin(3.141592653589793 * g.nodes[i]);
  Projection p = project_target(a, z, g, 6);

  // a_m(theta) = theta^m / m!, so the span is that of theta^1..theta^6; solve
  // the normal equations in that basis in long double.
  using LD = long double;
  const int R = 6;
  Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic> G(R, R);
  Eigen::Matrix<LD, Eigen::Dynamic, 1> b(R);
  G.setZero();
  b.setZero();
  for (std::size_t i = 0; i < g.size(); ++i) {
    LD th = g.nodes[i], w = g.weights[i];
    for (int j = 0; j < R; ++j) {
      b(j) += w * std::pow(th, j + 1) * z[i];
      for (int k = 0; k < R; ++k) G(j, k) += w * std::pow(th, j + k + 2);
    }
  }
  Eigen::Matrix<LD, Eigen::Dynamic, 1> c = G.fullPivLu().solve(b);
  LD acc = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    LD fit = 0;
    for (int j = 0; j < R; ++j) fit += c(j) * std::pow(static_cast<LD>(g.nodes[i]), j + 1);
    LD d = z[i] - fit;
    acc += g.weights[i] * d * d;
  }
  CHECK(std::abs(p.residual - static_cast<double>(std::sqrt(acc))) < 1e-9);
  CHECK_THROWS_AS(project_target(a, z, g, 7), Error);
  CHECK_THROWS_AS(project_target(Eigen::MatrixXd::Zero(64, 2), z, g, 2), Error);
}

TEST_CASE("choosing eps") {
  CHECK(choose_epsilon(0.1, 2, 1.0, 1e-300, 1.0) == 0.5);
  double eps = choose_epsilon(1e-2, 4, 2.0, 3.0, 10.0);
  CHECK(epsilon_admissible(eps, 1e-2, 4, 2.0, 3.0, 10.0));
  CHECK_FALSE(epsilon_admissible(2 * eps, 1e-2, 4, 2.0, 3.0, 10.0));
  CHECK(std::log2(eps) == std::round(std::log2(eps)));
  // Direct evaluation of the inequality.
  double pi = 3.141592653589793;
  CHECK(eps * pi * 3.0 / (2 * (2.0 - eps)) < 1e-2 * 16 / 10.0);
  double e2 = 4 * eps;
  CHECK_FALSE(e2 * pi * 3.0 / (2 * (2.0 - e2)) < 1e-2 * 16 / 10.0);

  double prev = 1.0;
  for (double b : {1.0, 2.0, 4.0, 8.0, 1e3, 1e6}) {
    double e = choose_epsilon(0.05, 3, 1.0, 2.0, b);
    CHECK(e <= prev);
    prev = e;
  }
  CHECK_THROWS_AS(choose_epsilon(1e-3, 4, 1.0, 2.0, 1e6, 1e-3), Error);
  CHECK_THROWS_AS(choose_epsilon(-1, 4, 1.0, 2.0, 1.0), Error);
}

TEST_CASE("synthesized controls meet the terminal constraints") {
  std::vector<double> y{0.7, -1.3, 0.25};
  for (double eps : {1.0, 0.125, 1e-3}) {
    ModelControls mc = synthesize_controls(y, eps, 3);
    CHECK(mc.U(0.0) == 0.0);
    CHECK(std::abs(mc.U(1.0)) < 1e-15);
    CHECK(mc.U(0.5) == doctest::Approx(-0.25 * eps));
    CHECK(std::abs(mc.v.antiderivative()(1.0)) < 1e-9 * std::pow(eps, -3));
    // Exact: the primitive of the rational coefficients vanishes at 1.
    Rational s = 0;
    const auto& c = mc.v.poly_coeffs();
    for (std::size_t k = 0; k < c.size(); ++k) s += c[k] / Rational(static_cast<long>(k) + 1);
    CHECK(s == 0);
  }
  ModelControls zero = synthesize_controls({0, 0}, 0.5, 2);
  for (double t : {0.0, 0.3, 1.0}) CHECK(zero.v(t) == 0.0);
  CHECK_THROWS_AS(synthesize_controls({1}, 0.5, 2), Error);
}

TEST_CASE("terminal evaluation") {
  ThetaGrid g = make_grid(GridKind::kGauss, 0, 1, 8);
  ModelControls mc = synthesize_controls({0.4, 0.1}, 0.25, 2);

  TerminalEvaluation lin = evaluate_terminal(parse_expr("theta*x"), g, mc.u, mc.v);
  // z = theta * int U v dt, computed here from the exact polynomial product.
  Poly Uq(1), vq(1);
  {
    Poly t = Poly::variable(1, 0);
    const auto& uc = mc.U.poly_coeffs();
    const auto& vc = mc.v.poly_coeffs();
    for (std::size_t k = 0; k < uc.size(); ++k) Uq = Uq + t.pow(static_cast<unsigned>(k)) * uc[k];
    for (std::size_t k = 0; k < vc.size(); ++k) vq = vq + t.pow(static_cast<unsigned>(k)) * vc[k];
  }
  double I = integral01(Uq * vq).get_d();
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(lin.z_quad[i] == doctest::Approx(g.nodes[i] * I).epsilon(1e-13));
    CHECK(std::abs(lin.z_ode[i] - lin.z_quad[i]) < 1e-9);
    CHECK(std::abs(lin.x1[i]) < 1e-14);
    CHECK(std::abs(lin.y1[i]) < 1e-14);
  }

  TerminalEvaluation none = evaluate_terminal(parse_expr("exp(theta*x)-1"), g, mc.u, ControlSignal());
  for (double z : none.z_quad) CHECK(z == 0.0);

  TerminalOptions quick;
  quick.ode_check = false;
  TerminalEvaluation nq = evaluate_terminal(parse_expr("exp(theta*x)-1"), g, mc.u, mc.v, quick);
  CHECK(nq.z_ode.empty());
}

TEST_CASE("model synthesis runs") {
  ModelScenario sc;
  sc.f = parse_expr("exp(theta*x)-1");
  sc.grid = make_grid(GridKind::kGauss, 0, 1, 16);
  sc.mu_f = std::exp(1.0) - 1;
  sc.target = parse_expr("theta/2");
  sc.eps1 = 0.05;
  SynthesisReport r = verify_model(sc);
  CHECK(r.ok);
  CHECK(r.R == 1);
  CHECK(r.terminal_error < 2 * sc.eps1);
  CHECK(r.y[0] == doctest::Approx(r.c[0] * 30).epsilon(1e-12));
  CHECK(r.decomposition_ok);

  ModelScenario bad = sc;
  bad.mu_f = 0.5;
  SynthesisReport rb = verify_model(bad);
  CHECK_FALSE(rb.ok);
  CHECK(rb.failed_stage == "mu_f_check");

  ModelScenario nec;
  nec.f = parse_expr("theta*x");
  nec.target = parse_expr("theta^2");
  nec.grid = make_grid(GridKind::kGauss, 0, 1, 16);
  nec.mu_f = 1;
  nec.eps1 = 0.01;
  SynthesisReport rn = verify_model(nec);
  CHECK_FALSE(rn.ok);
  CHECK(rn.failed_stage == "projection");
  CHECK(rn.projection_residual == doctest::Approx(1 / std::sqrt(80.0)).epsilon(1e-9));
}
