#include "moments.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <cmath>

#include "odesim.hpp"

namespace ensctl {

Poly legendre(int k) {
  if (k < 0) throw Error(ErrorKind::kInvalidArgument, "Legendre index must be non-negative");
  Poly t = Poly::variable(1, 0);
  Poly p = (t * t - t).pow(static_cast<unsigned>(k));
  Rational fact = 1;
  for (int i = 1; i <= k; ++i) {
    p = p.derivative(0);
    fact *= i;
  }
  return p * Rational(1 / fact);
}

Rational gamma_moment(int m, int r) {
  if (m < 1 || r < 1) throw Error(ErrorKind::kInvalidArgument, "gamma_moment needs m >= 1 and r >= 1");
  Poly t = Poly::variable(1, 0);
  return ((t * t - t).pow(static_cast<unsigned>(m)) * legendre(2 * r)).integrate_unit();
}

GammaMatrix gamma_matrix(int M, int R, const Rational& eps) {
  if (M < 1 || R < 1) throw Error(ErrorKind::kInvalidArgument, "gamma_matrix needs M >= 1 and R >= 1");
  GammaMatrix g;
  g.M = M;
  g.R = R;
  g.eps = eps;
  g.entries.resize(static_cast<std::size_t>(M) * R);
  std::vector<Poly> P;
  for (int r = 1; r <= R; ++r) P.push_back(legendre(2 * r));
  Poly t = Poly::variable(1, 0);
  Poly base = t * t - t;
  Poly power = Poly::constant(1, 1);
  for (int m = 1; m <= M; ++m) {
    power = power * base;
    for (int r = 1; r <= R; ++r) {
      Rational v = (power * P[r - 1]).integrate_unit();
      if (eps != 1 && v != 0) {
        int e = m - r;
        Rational s = 1;
        for (int k = 0; k < std::abs(e); ++k) s *= eps;
        v = e >= 0 ? Rational(v * s) : Rational(v / s);
      }
      g.entries[static_cast<std::size_t>((m - 1) * R + (r - 1))] = v;
    }
  }
  return g;
}

Projection project_target(const Eigen::MatrixXd& a, const std::vector<double>& zhat,
                          const ThetaGrid& grid, int R) {
  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  if (R < 1 || R > a.cols()) throw Error(ErrorKind::kInvalidArgument, "R exceeds available Taylor order");
  if (a.rows() != n || static_cast<Eigen::Index>(zhat.size()) != n) {
    throw Error(ErrorKind::kDimensionMismatch, "projection data must match the grid");
  }
  for (double w : grid.weights) {
    if (!(w > 0)) throw Error(ErrorKind::kInvalidArgument, "grid weights must be positive");
  }
  Eigen::MatrixXd A = a.leftCols(R);
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(grid.weights.data(), n);
  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zhat.data(), n);
  Eigen::MatrixXd G = A.transpose() * w.asDiagonal() * A;
  Eigen::VectorXd rhs = A.transpose() * w.asDiagonal() * z;
  if (G.diagonal().maxCoeff() <= 0.0) {
    throw Error(ErrorKind::kDegenerate, "all basis functions vanish on the grid");
  }
  // Jacobi equilibration; zero columns stay zero and get unit scale.
  Eigen::VectorXd s(R);
  for (int j = 0; j < R; ++j) s(j) = G(j, j) > 0 ? 1.0 / std::sqrt(G(j, j)) : 1.0;
  Eigen::MatrixXd Gs = s.asDiagonal() * G * s.asDiagonal();
  Eigen::VectorXd rs = s.asDiagonal() * rhs;

  Projection out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Gs, Eigen::EigenvaluesOnly);
  double lmin = eig.eigenvalues().minCoeff(), lmax = eig.eigenvalues().maxCoeff();
  out.gram_cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (out.gram_cond > 1e12) {
    Gs.diagonal().array() += 1e-12 * Gs.trace() / R;
    out.regularized = true;
  }
  Eigen::VectorXd cs = Gs.ldlt().solve(rs);
  Eigen::VectorXd c = s.asDiagonal() * cs;
  out.c.assign(c.data(), c.data() + R);
  Eigen::VectorXd r = z - A * c;
  out.residual = std::sqrt((w.array() * r.array().square()).sum());
  return out;
}

bool epsilon_admissible(double eps, double eps1, int R, double rho, double mu_f, double b_y) {
  const double pi = boost::math::constants::pi<double>();
  if (!(eps < rho)) return false;
  double lhs = eps * pi * mu_f / (2.0 * (rho - eps));
  double rhs = b_y > 0 ? eps1 * std::pow(rho, R) / b_y : std::numeric_limits<double>::infinity();
  return lhs < rhs;
}

double choose_epsilon(double eps1, int R, double rho, double mu_f, double b_y, double eps_floor) {
  if (!(eps1 > 0) || !(rho > 0) || mu_f < 0 || b_y < 0 || R < 1) {
    throw Error(ErrorKind::kInvalidArgument, "choose_epsilon inputs must be positive");
  }
  for (int j = 0; j < 2000; ++j) {
    double eps = std::ldexp(0.5 * rho, -j);
    if (eps < eps_floor) break;
    if (epsilon_admissible(eps, eps1, R, rho, mu_f, b_y)) return eps;
  }
  throw Error(ErrorKind::kInfeasible,
              "no admissible eps >= " + format_double(eps_floor) + " for eps1 = " + format_double(eps1) +
                  ", R = " + std::to_string(R) + ", b_y = " + format_double(b_y));
}

ModelControls synthesize_controls(const std::vector<double>& y, double eps, int R) {
  if (!(eps > 0)) throw Error(ErrorKind::kInvalidArgument, "eps must be positive");
  if (static_cast<int>(y.size()) != R) throw Error(ErrorKind::kDimensionMismatch, "y must have length R");
  Rational e = to_rational(eps);
  ModelControls out;
  // U^eps = eps (t^2 - t), u = eps (2t - 1).
  out.u = ControlSignal::polynomial(std::vector<Rational>{-e, 2 * e});
  out.U = out.u.antiderivative();
  Poly v(1);
  Rational einv_r = 1;
  for (int r = 1; r <= R; ++r) {
    einv_r /= e;
    if (y[r - 1] == 0.0) continue;
    v += legendre(2 * r) * Rational(to_rational(y[r - 1]) * einv_r);
  }
  std::vector<Rational> coeffs(static_cast<std::size_t>(std::max(0, v.total_degree() + 1)));
  for (const auto& [ex, c] : v.terms()) coeffs[ex[0]] = c;
  out.v = ControlSignal::polynomial(std::move(coeffs));
  return out;
}

namespace {

struct MpPoly {
  std::vector<Mp> c;
  explicit MpPoly(const std::vector<Rational>& q) {
    for (const auto& v : q) c.push_back(to_mp(v));
  }
  Mp operator()(const Mp& t) const {
    Mp r = 0;
    for (std::size_t k = c.size(); k-- > 0;) r = r * t + c[k];
    return r;
  }
};

// Gauss-Legendre rule on [0, 1] at the current precision.
void gauss_legendre_unit_mp(int n, std::vector<Mp>& x, std::vector<Mp>& w, int digits) {
  std::vector<double> xd, wd;
  gauss_legendre(n, xd, wd);
  x.assign(n, Mp(0));
  w.assign(n, Mp(0));
  Mp tol = boost::multiprecision::pow(Mp(10), -(digits + 2));
  for (int i = 0; i < n; ++i) {
    Mp xi = xd[i];
    Mp dp = 0;
    for (int it = 0; it < 60; ++it) {
      Mp p0 = 1, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        Mp p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (xi * p1 - p0) / (xi * xi - 1);
      Mp dx = p1 / dp;
      xi -= dx;
      if (abs(dx) < tol) {
        if (it > 0) break;
      }
    }
    {
      Mp p0 = 1, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        Mp p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (xi * p1 - p0) / (xi * xi - 1);
    }
    x[i] = (xi + 1) / 2;
    w[i] = 1 / ((1 - xi * xi) * dp * dp);
  }
}

// Weights omega with F0 = sum omega_k F(h_k) under F(h) = F0 + sum_{p=4}^{K+2} c_p h^p, h_k ~ 1/k.
std::vector<Mp> extrapolation_weights(int K) {
  std::vector<std::vector<Mp>> M(K, std::vector<Mp>(K));
  for (int k = 1; k <= K; ++k) {
    Mp inv = Mp(1) / k;
    M[k - 1][0] = 1;
    Mp p = boost::multiprecision::pow(inv, 4);
    for (int j = 1; j < K; ++j) {
      M[k - 1][j] = p;
      p *= inv;
    }
  }
  // Solve M^T omega = e_1.
  std::vector<std::vector<Mp>> A(K, std::vector<Mp>(K + 1));
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) A[i][j] = M[j][i];
    A[i][K] = i == 0 ? 1 : 0;
  }
  for (int c = 0; c < K; ++c) {
    int piv = c;
    for (int r = c + 1; r < K; ++r) {
      if (abs(A[r][c]) > abs(A[piv][c])) piv = r;
    }
    std::swap(A[c], A[piv]);
    for (int r = 0; r < K; ++r) {
      if (r == c || A[r][c] == 0) continue;
      Mp f = A[r][c] / A[c][c];
      for (int j = c; j <= K; ++j) A[r][j] -= f * A[c][j];
    }
  }
  std::vector<Mp> omega(K);
  for (int i = 0; i < K; ++i) omega[i] = A[i][K] / A[i][i];
  return omega;
}

}  // namespace

TerminalEvaluation evaluate_terminal(const Expr& f, const ThetaGrid& grid, const ControlSignal& u,
                                     const ControlSignal& v, const TerminalOptions& options) {
  if (!u.is_polynomial() || !v.is_polynomial()) {
    throw Error(ErrorKind::kUnsupportedInput, "terminal evaluation needs polynomial controls");
  }
  ControlSignal U = u.antiderivative();
  double gain = 1.0;
  for (const auto& c : v.poly_coeffs()) gain += std::abs(c.get_d());
  for (const auto& c : U.poly_coeffs()) gain += std::abs(c.get_d());
  TerminalEvaluation out;
  out.digits = options.extra_digits + static_cast<int>(std::ceil(std::log10(gain))) + 5;
  MpPrecision guard(static_cast<unsigned>(out.digits));

  MpPoly Up(U.poly_coeffs()), up(u.poly_coeffs()), vp(v.poly_coeffs());
  const std::size_t nodes = grid.size();
  out.z_quad.assign(nodes, 0.0);
  std::vector<Mp> theta(nodes);
  for (std::size_t i = 0; i < nodes; ++i) theta[i] = grid.nodes[i];

  // Quadrature: Gauss-Legendre with doubling until two rules agree.
  const Mp tol = options.quad_tol;
  std::vector<Mp> prev;
  std::vector<Mp> cur(nodes);
  bool converged = false;
  Mp last_diff = 0;
  for (int n = 32; n <= 1024; n *= 2) {
    std::vector<Mp> x, w;
    gauss_legendre_unit_mp(n, x, w, out.digits);
    std::vector<Mp> Ux(n), vx(n);
    for (int k = 0; k < n; ++k) {
      Ux[k] = Up(x[k]);
      vx[k] = vp(x[k]);
    }
    for (std::size_t i = 0; i < nodes; ++i) {
      Mp acc = 0;
      for (int k = 0; k < n; ++k) acc += w[k] * eval_expr<Mp>(f, Ux[k], theta[i]) * vx[k];
      cur[i] = acc;
    }
    if (!prev.empty()) {
      last_diff = 0;
      for (std::size_t i = 0; i < nodes; ++i) {
        Mp d = abs(cur[i] - prev[i]) / (1 + abs(cur[i]));
        if (d > last_diff) last_diff = d;
      }
      if (last_diff <= tol) {
        converged = true;
        out.quad_points = n;
        break;
      }
    }
    prev = cur;
  }
  if (!converged) {
    throw Error(ErrorKind::kAccuracy, "terminal quadrature did not converge; achieved relative change " +
                                          format_double(static_cast<double>(last_diff)));
  }
  for (std::size_t i = 0; i < nodes; ++i) out.z_quad[i] = static_cast<double>(cur[i]);

  if (!options.ode_check) return out;

  // RK4 on (x, y, z)' = (u, v, f(x) v) at n = 16k steps, extrapolated in h.
  const int kmin = 6, kmax = 24;
  std::vector<std::vector<Mp>> X, Y;          // [level] -> value (node independent)
  std::vector<std::vector<Mp>> Z(nodes);       // [node][level]
  std::vector<Mp> xs, ys;
  std::vector<Mp> ex_prev_x, ex_prev_y;
  std::vector<Mp> ex_prev_z(nodes), ex_z(nodes);
  Mp ex_x = 0, ex_y = 0, ex_px = 0, ex_py = 0;
  Mp conv_tol = boost::multiprecision::pow(Mp(10), -16);
  bool done = false;
  for (int k = 1; k <= kmax && !done; ++k) {
    const long n = 16L * k;
    const Mp h = Mp(1) / n;
    const Mp hh = h / 2;
    std::vector<Mp> ut(2 * n + 1), vt(2 * n + 1);
    for (long j = 0; j <= 2 * n; ++j) {
      Mp t = hh * j;
      ut[j] = up(t);
      vt[j] = vp(t);
    }
    // Stage arguments of f are node independent.
    std::vector<Mp> s1(n), s2(n), s3(n), s4(n);
    Mp x = 0, y = 0;
    for (long s = 0; s < n; ++s) {
      const Mp& u0 = ut[2 * s];
      const Mp& um = ut[2 * s + 1];
      const Mp& u1 = ut[2 * s + 2];
      s1[s] = x;
      s2[s] = x + hh * u0;
      s3[s] = x + hh * um;
      s4[s] = x + h * um;
      x += h / 6 * (u0 + 4 * um + u1);
      y += h / 6 * (vt[2 * s] + 4 * vt[2 * s + 1] + vt[2 * s + 2]);
    }
    xs.push_back(x);
    ys.push_back(y);
    for (std::size_t i = 0; i < nodes; ++i) {
      Mp z = 0;
      for (long s = 0; s < n; ++s) {
        const Mp& v0 = vt[2 * s];
        const Mp& vm = vt[2 * s + 1];
        const Mp& v1 = vt[2 * s + 2];
        Mp k1 = eval_expr<Mp>(f, s1[s], theta[i]) * v0;
        Mp k2 = eval_expr<Mp>(f, s2[s], theta[i]) * vm;
        Mp k3 = eval_expr<Mp>(f, s3[s], theta[i]) * vm;
        Mp k4 = eval_expr<Mp>(f, s4[s], theta[i]) * v1;
        z += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
      Z[i].push_back(z);
    }
    if (k < kmin - 1) continue;
    auto omega = extrapolation_weights(k);
    auto combine = [&](const std::vector<Mp>& vals) {
      Mp acc = 0;
      for (int j = 0; j < k; ++j) acc += omega[j] * vals[j];
      return acc;
    };
    ex_x = combine(xs);
    ex_y = combine(ys);
    for (std::size_t i = 0; i < nodes; ++i) ex_z[i] = combine(Z[i]);
    if (k >= kmin) {
      bool ok = abs(ex_x - ex_px) <= conv_tol && abs(ex_y - ex_py) <= conv_tol;
      for (std::size_t i = 0; i < nodes && ok; ++i) {
        ok = abs(ex_z[i] - ex_prev_z[i]) <= conv_tol * (1 + abs(ex_z[i]));
      }
      if (ok) done = true;
    }
    ex_px = ex_x;
    ex_py = ex_y;
    ex_prev_z = ex_z;
    out.ode_levels = k;
  }
  out.z_ode.resize(nodes);
  out.x1.assign(nodes, static_cast<double>(ex_x));
  out.y1.assign(nodes, static_cast<double>(ex_y));
  for (std::size_t i = 0; i < nodes; ++i) {
    out.z_ode[i] = static_cast<double>(ex_z[i]);
    out.max_ode_gap = std::max(out.max_ode_gap, static_cast<double>(abs(ex_z[i] - cur[i])));
  }
  return out;
}

SynthesisReport verify_model(const ModelScenario& sc) {
  SynthesisReport rep;
  rep.eps1 = sc.eps1;
  rep.bound_2eps1 = 2.0 * sc.eps1;
  const ThetaGrid& grid = sc.grid;
  const std::size_t nodes = grid.size();
  if (!(sc.eps1 > 0) || !(sc.rho > 0) || !(sc.mu_f > 0)) {
    throw Error(ErrorKind::kInvalidArgument, "eps1, rho and mu_f must be positive");
  }
  if (depends_on_x(sc.target)) throw Error(ErrorKind::kInvalidArgument, "target must not depend on x");
  auto fail = [&](const std::string& stage, const std::string& msg) {
    rep.ok = false;
    rep.failed_stage = stage;
    rep.message = msg;
    return rep;
  };

  // Sampled check of |f| <= mu_f on [-rho/2, rho/2] x grid.
  for (std::size_t i = 0; i < nodes; ++i) {
    for (int k = 0; k <= 32; ++k) {
      double x = -0.5 * sc.rho + sc.rho * k / 32.0;
      double fx;
      try {
        fx = eval_expr<double>(sc.f, x, grid.nodes[i]);
      } catch (const Error& e) {
        return fail("mu_f_check", std::string(e.what()) + " at grid node " + std::to_string(i));
      }
      rep.mu_f_observed = std::max(rep.mu_f_observed, std::abs(fx));
    }
  }
  if (!(rep.mu_f_observed <= sc.mu_f * (1 + 1e-12))) {
    return fail("mu_f_check", "sampled |f| = " + format_double(rep.mu_f_observed) + " exceeds mu_f");
  }

  const int M = sc.R_max;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(nodes), M);
  rep.z_target.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    std::vector<double> jet;
    try {
      jet = taylor_series<double>(sc.f, grid.nodes[i], M);
      rep.z_target[i] = eval_expr<double>(sc.target, 0.0, grid.nodes[i]);
    } catch (const Error& e) {
      return fail("taylor", std::string(e.what()) + " at grid node " + std::to_string(i));
    }
    for (int m = 1; m <= M; ++m) a(static_cast<Eigen::Index>(i), m - 1) = jet[m];
  }

  Projection proj;
  try {
    int R_hi = sc.R ? *sc.R : M;
    for (int R = 1; R <= R_hi; ++R) {
      Projection p = project_target(a, rep.z_target, grid, R);
      rep.residual_by_R.push_back(p.residual);
      if (sc.R ? R == *sc.R : p.residual < sc.eps1) {
        proj = p;
        rep.R = R;
        break;
      }
    }
  } catch (const Error& e) {
    return fail("projection", e.what());
  }
  if (rep.R == 0) {
    rep.projection_residual = *std::min_element(rep.residual_by_R.begin(), rep.residual_by_R.end());
    return fail("projection", "no R <= " + std::to_string(M) + " reaches residual below eps1; best " +
                                  format_double(rep.projection_residual));
  }
  rep.projection_residual = proj.residual;
  rep.c = proj.c;
  for (int r = 1; r <= rep.R; ++r) {
    rep.y.push_back(rep.c[r - 1] / gamma_moment(r, r).get_d());
    rep.b_y += std::abs(rep.y.back());
  }

  try {
    rep.eps = choose_epsilon(sc.eps1, rep.R, sc.rho, sc.mu_f, rep.b_y, sc.eps_floor);
  } catch (const Error& e) {
    return fail("choose_epsilon", e.what());
  }
  rep.controls = synthesize_controls(rep.y, rep.eps, rep.R);

  try {
    rep.terminal = evaluate_terminal(sc.f, grid, rep.controls->u, rep.controls->v, sc.terminal);
  } catch (const Error& e) {
    return fail("terminal", e.what());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    double d = rep.z_target[i] - rep.terminal.z_quad[i];
    acc += grid.weights[i] * d * d;
  }
  rep.terminal_error = std::sqrt(acc);

  // Per-mode tail bound with the Cauchy estimate |a_m| <= 2 pi mu_f rho^-m.
  const double pi = boost::math::constants::pi<double>();
  double tail = 0.0;
  for (int r = 1; r <= rep.R; ++r) {
    tail += std::abs(rep.y[r - 1]) * pi * sc.mu_f / (4.0 * std::pow(sc.rho, r) * (sc.rho - rep.eps));
  }
  rep.perturbation_bound = rep.eps * tail * std::sqrt(grid.b - grid.a);
  rep.decomposition_ok =
      rep.terminal_error <= rep.projection_residual + rep.perturbation_bound + 1e-12;

  if (sc.terminal.ode_check) {
    if (rep.terminal.max_ode_gap > sc.ode_tolerance) {
      return fail("ode_cross_check", "quadrature and ODE terminal values differ by " +
                                         format_double(rep.terminal.max_ode_gap));
    }
    double xm = 0, ym = 0;
    for (std::size_t i = 0; i < nodes; ++i) {
      xm = std::max(xm, std::abs(rep.terminal.x1[i]));
      ym = std::max(ym, std::abs(rep.terminal.y1[i]));
    }
    if (xm > sc.terminal_state_tolerance || ym > sc.terminal_state_tolerance) {
      return fail("ode_cross_check", "terminal x(1), y(1) not at rest");
    }
  }
  if (!(rep.terminal_error < rep.bound_2eps1)) {
    return fail("terminal", "terminal error " + format_double(rep.terminal_error) + " is not below 2 eps1");
  }
  if (!rep.decomposition_ok) {
    return fail("decomposition", "terminal error exceeds projection residual plus perturbation bound");
  }
  rep.ok = true;
  return rep;
}

}  // namespace ensctl
