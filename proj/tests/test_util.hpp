#pragma once

#include <random>
#include <vector>

#include "poly.hpp"

namespace testutil {

inline ensctl::Rational small_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(-5, 5), den(1, 4);
  ensctl::Rational q(num(rng), den(rng));
  q.canonicalize();
  return q;
}

// Dense-ish random polynomial in n variables of total degree <= deg.
inline ensctl::Poly random_poly(std::mt19937_64& rng, std::size_t n, unsigned deg, int terms = 4) {
  ensctl::Poly p(n);
  std::uniform_int_distribution<unsigned> e(0, deg);
  std::uniform_int_distribution<std::size_t> var(0, n - 1);
  for (int t = 0; t < terms; ++t) {
    ensctl::Exponent ex(n, 0);
    unsigned total = e(rng);
    for (unsigned k = 0; k < total; ++k) ex[var(rng)] += 1;
    p.add_term(ex, small_rational(rng));
  }
  return p;
}

inline ensctl::PolyField random_field(std::mt19937_64& rng, std::size_t n, unsigned deg) {
  std::vector<ensctl::Poly> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(random_poly(rng, n, deg));
  return ensctl::PolyField(std::move(c));
}

inline std::vector<double> random_point(std::mt19937_64& rng, std::size_t n, double r = 1.0) {
  std::uniform_real_distribution<double> u(-r, r);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace testutil
