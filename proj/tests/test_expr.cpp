#include <cmath>
#include <random>

#include "doctest.h"
#include "expr.hpp"
#include "grid.hpp"

using namespace ensctl;

TEST_CASE("parse builds the expected tree") {
  Expr e = parse_expr("theta*x^2");
  REQUIRE(e->kind == ExprKind::kMul);
  CHECK(e->args[0]->kind == ExprKind::kTheta);
  CHECK(e->args[1]->kind == ExprKind::kPow);
  CHECK(e->args[1]->exponent == 2);

  Expr f = parse_expr("exp(theta*x)-1");
  REQUIRE(f->kind == ExprKind::kSub);
  CHECK(f->args[0]->kind == ExprKind::kExp);
  CHECK(f->args[1]->kind == ExprKind::kNum);
  CHECK(f->args[1]->value == 1);

  // Unary minus binds looser than ^.
  Expr g = parse_expr("-x^2");
  CHECK(g->kind == ExprKind::kNeg);
  CHECK(eval_expr<double>(g, 3.0, 0.0) == -9.0);
  CHECK(expr_equal(parse_expr(" x *  theta "), parse_expr("x*theta")));
}

TEST_CASE("syntax errors carry the offset") {
  try {
    parse_expr("x^^2");
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSyntax);
    CHECK(std::string(e.what()).find("offset 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_expr("x^1.5"), Error);
  CHECK_THROWS_AS(parse_expr("sin x"), Error);
  CHECK_THROWS_AS(parse_expr("y + 1"), Error);
  CHECK_THROWS_AS(parse_expr("(x"), Error);
  CHECK_THROWS_AS(parse_expr(""), Error);
}

TEST_CASE("serialize round trip") {
  const char* corpus[] = {"theta*x^2",         "exp(theta*x)-1",     "sin(pi*theta)",  "-x^2",
                          "(x+1)^3",           "x/(theta+1)",        "x-(theta-1)",    "log(1+x)*cos(x)",
                          "2^-1*x",            "-(x+theta)*3",       "1.25e-3*x/7",    "x^-2+theta^0",
                          "exp(sin(cos(x)))", "x-(-x)",             "(-x)^2",         "theta*x*x/2/3"};
  for (const char* s : corpus) {
    Expr a = parse_expr(s);
    Expr b = parse_expr(serialize(a));
    CHECK_MESSAGE(expr_equal(a, b), s);
    CHECK(serialize(b) == serialize(a));
  }
}

TEST_CASE("random trees survive serialization") {
  std::mt19937_64 rng(3);
  std::function<Expr(int)> gen = [&](int d) -> Expr {
    std::uniform_int_distribution<int> pick(0, d > 0 ? 8 : 2);
    switch (pick(rng)) {
      case 0: return make_var(ExprKind::kX);
      case 1: return make_var(ExprKind::kTheta);
      case 2: {
        // Literals are decimal, so only dyadic values survive a text round trip.
        Rational q(static_cast<int>(rng() % 7) + 1, 1 << (rng() % 3));
        q.canonicalize();
        return make_num(q);
      }
      case 3: return make_binary(ExprKind::kAdd, gen(d - 1), gen(d - 1));
      case 4: return make_binary(ExprKind::kSub, gen(d - 1), gen(d - 1));
      case 5: return make_binary(ExprKind::kMul, gen(d - 1), gen(d - 1));
      case 6: return make_binary(ExprKind::kDiv, gen(d - 1), gen(d - 1));
      case 7: return make_pow(gen(d - 1), static_cast<int>(rng() % 5) - 2);
      default: return make_unary(rng() % 2 ? ExprKind::kNeg : ExprKind::kSin, gen(d - 1));
    }
  };
  for (int k = 0; k < 200; ++k) {
    Expr e = gen(4);
    CHECK(expr_equal(parse_expr(serialize(e)), e));
  }
}

TEST_CASE("Taylor coefficients") {
  auto jet = taylor_coeffs(parse_expr("exp(theta*x) - 1"), 2.0, 3);
  REQUIRE(jet.coeffs.size() == 4);
  CHECK(jet.coeffs[0] == 0.0);
  CHECK(jet.coeffs[1] == doctest::Approx(2.0));
  CHECK(jet.coeffs[2] == doctest::Approx(2.0));
  CHECK(jet.coeffs[3] == doctest::Approx(4.0 / 3.0));

  auto lin = taylor_coeffs(parse_expr("theta*x"), 0.7, 2);
  CHECK(lin.coeffs == std::vector<double>{0.0, 0.7, 0.0});

  auto s = taylor_coeffs(parse_expr("sin(x)*theta"), 1.0, 5);
  std::vector<double> want{0, 1, 0, -1.0 / 6, 0, 1.0 / 120};
  for (int k = 0; k <= 5; ++k) CHECK(s.coeffs[k] == doctest::Approx(want[k]).epsilon(1e-15));

  CHECK_THROWS_AS(taylor_coeffs(parse_expr("log(x)"), 1.0, 3), Error);
  CHECK_THROWS_AS(taylor_coeffs(parse_expr("1/x"), 1.0, 3), Error);
}

TEST_CASE("Taylor coefficients of polynomials are exact") {
  Expr e = parse_expr("(1/3 + x)^4 * (2 - x/5) - 7/2*x^3");
  auto q = taylor_series<Rational>(e, Rational(0), 6);
  // Hand expansion of (1/3 + x)^4 (2 - x/5) - 7/2 x^3.
  std::vector<Rational> binom{Rational(1, 81), Rational(4, 27), Rational(2, 3), Rational(4, 3), Rational(1)};
  std::vector<Rational> want(7, 0);
  for (int k = 0; k <= 4; ++k) {
    want[k] += 2 * binom[k];
    want[k + 1] -= binom[k] / 5;
  }
  want[3] -= Rational(7, 2);
  for (int k = 0; k <= 6; ++k) CHECK(q[k] == want[k]);
}

TEST_CASE("first Taylor coefficient matches a central difference") {
  const char* smooth[] = {"exp(theta*x)-1", "sin(theta*x)+cos(x)", "log(2+x)*theta", "x/(1+theta*x^2)",
                          "(1+x)^-3"};
  for (const char* s : smooth) {
    Expr e = parse_expr(s);
    for (double th : {0.3, 1.0, 1.7}) {
      double h = 1e-5;
      double fd = (eval_expr<double>(e, h, th) - eval_expr<double>(e, -h, th)) / (2 * h);
      CHECK(std::abs(taylor_coeffs(e, th, 3).coeffs[1] - fd) < 1e-7);
    }
  }
}

TEST_CASE("grid evaluation") {
  ThetaGrid g = make_grid(GridKind::kUniform, 0, 1, 3);
  CHECK(eval_grid(parse_expr("theta"), g, 5.0) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(eval_grid(parse_expr("x"), g, 2.0) == std::vector<double>{2.0, 2.0, 2.0});
  CHECK(eval_grid(parse_expr("exp(theta*x)-1"), g, 1.0)[2] == doctest::Approx(std::exp(1.0) - 1));
  try {
    eval_grid(parse_expr("1/theta"), g, 0.0);
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDomain);
    CHECK(std::string(e.what()).find("node 0") != std::string::npos);
  }
}

TEST_CASE("pi constant") {
  CHECK(eval_expr<double>(parse_expr("sin(pi*theta)"), 0.0, 0.5) == doctest::Approx(1.0));
  CHECK(serialize(parse_expr("2*pi")) == "2*pi");
  CHECK_THROWS_AS(eval_expr<Rational>(parse_expr("pi"), Rational(0), Rational(0)), Error);
}
