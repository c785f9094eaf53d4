#include "lieext.hpp"

#include <Eigen/Dense>
#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <limits>

#include "odesim.hpp"

namespace ensctl {

ReductionPlan reduce_controls(const ControlSignal& u_e, const ControlSignal& v_e,
                              const ControlSignal& w_e, double T, int n) {
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "n must be at least 1");
  if (!(T > 0) || !std::isfinite(T)) throw Error(ErrorKind::kInvalidArgument, "T must be positive");
  if (!w_e.is_differentiable()) {
    throw Error(ErrorKind::kUnsupportedInput, "w_e must be differentiable (polynomial or sampled with slopes)");
  }
  const double pi = boost::math::constants::pi<double>();
  ReductionPlan p;
  p.T = T;
  p.n = n;
  p.eps = std::sqrt(T / (pi * n));
  // t / eps^2 = pi (n / T) t, so sin(t / eps^2) = sin_pi(rate t) with rate = n / T.
  const double rate = static_cast<double>(n) / T;
  p.U_eps = ControlSignal::sinusoid(2.0, rate, 0.0, w_e);
  p.vhat = ControlSignal::sinusoid(1.0, rate, 0.0, ControlSignal::constant(1.0));
  p.u_eps = ControlSignal::sum({u_e, p.U_eps.derivative().scaled(p.eps)});
  p.v_eps = ControlSignal::sum({v_e, p.vhat.scaled(1.0 / p.eps)});
  return p;
}

namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_finite(double t, const std::vector<double>& x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kDivergence, "non-finite state at t = " + format_double(t));
  }
}

}  // namespace

FlowDecomposition flow_decomposition_check(const PolyField& f, const PolyField& g,
                                           const ControlSignal& u, const std::vector<double>& x0,
                                           double T, double h) {
  const std::size_t d = x0.size();
  if (f.dim() != d || g.dim() != d) throw Error(ErrorKind::kDimensionMismatch, "field dims differ from x0");
  if (!g.is_constant()) throw Error(ErrorKind::kUnsupportedInput, "g must be a constant field");
  ControlSignal U = u.antiderivative();

  CompiledField cf(f), cg(g);
  std::vector<double> fx(d), gx(d);
  FlowDecomposition out;
  out.lhs_endpoint = x0;
  rk4(
      [&](double t, const double* x, double* dx) {
        cf(x, dx);
        cg(x, gx.data());
        double ut = u(t);
        for (std::size_t i = 0; i < d; ++i) dx[i] += ut * gx[i];
      },
      out.lhs_endpoint, 0.0, T, h, check_finite);

  // Pulled-back field sum_j U^j ad_g^j f / j!, finite since g is constant.
  std::vector<CompiledField> terms;
  for (const auto& t : ad_series_terms(f, g)) terms.emplace_back(t);
  std::vector<double> tx(d);
  out.rhs_endpoint = x0;
  rk4(
      [&](double t, const double* x, double* dx) {
        std::fill(dx, dx + d, 0.0);
        double Ut = U(t), p = 1.0;
        for (const auto& term : terms) {
          term(x, tx.data());
          for (std::size_t i = 0; i < d; ++i) dx[i] += p * tx[i];
          p *= Ut;
        }
      },
      out.rhs_endpoint, 0.0, T, h, check_finite);
  double UT = U(T);
  std::vector<double> zero(d, 0.0);
  cg(zero.data(), gx.data());
  for (std::size_t i = 0; i < d; ++i) out.rhs_endpoint[i] += UT * gx[i];
  out.gap = euclid(out.lhs_endpoint, out.rhs_endpoint);
  return out;
}

ExtendedSteer extended_steer(const std::vector<std::vector<PolyField>>& ensemble,
                             const ThetaGrid& grid, const PolyField& Y,
                             const std::vector<double>& x_start, double T, int depth, int samples,
                             const SteerOptions& options) {
  const std::size_t nodes = grid.size();
  const std::size_t d = x_start.size();
  if (ensemble.size() != nodes) throw Error(ErrorKind::kDimensionMismatch, "ensemble size differs from grid");
  if (Y.dim() != d) throw Error(ErrorKind::kDimensionMismatch, "Y dim differs from x_start");
  if (samples < 2) throw Error(ErrorKind::kInvalidArgument, "need at least 2 samples");
  if (!(T > 0)) throw Error(ErrorKind::kInvalidArgument, "T must be positive");
  if (options.dense_factor < 1) throw Error(ErrorKind::kInvalidArgument, "dense_factor must be positive");
  for (const auto& sys : ensemble) {
    for (const auto& X : sys) {
      if (X.dim() != d) throw Error(ErrorKind::kDimensionMismatch, "ensemble field dim differs from x_start");
    }
  }

  // Labels whose brackets repeat an earlier one up to sign (e.g. [Y,X]) are dropped.
  std::vector<LabeledFamily> families;
  for (auto& fam : iterated_brackets_product(ensemble, depth)) {
    bool dup = false;
    for (const auto& kept : families) {
      bool same = true, neg = true;
      for (std::size_t s = 0; s < fam.fields.size() && (same || neg); ++s) {
        same = same && fam.fields[s] == kept.fields[s];
        neg = neg && fam.fields[s] == kept.fields[s] * Rational(-1);
      }
      if (same || neg) {
        dup = true;
        break;
      }
    }
    if (!dup) families.push_back(std::move(fam));
  }
  const std::size_t nl = families.size();
  ExtendedSteer out;
  std::vector<std::vector<CompiledField>> XF(nodes);  // [node][label]
  for (const auto& fam : families) {
    out.labels.push_back(fam.label);
    for (std::size_t i = 0; i < nodes; ++i) XF[i].emplace_back(fam.fields[i]);
  }

  // Reference path along Y on the dense grid.
  const long dense = static_cast<long>(samples - 1) * options.dense_factor;
  const double h = T / static_cast<double>(dense);
  CompiledField cy(Y);
  std::vector<double> dense_t;
  std::vector<std::vector<double>> path;
  {
    std::vector<double> x = x_start;
    for (long k = 0; k <= dense; ++k) {
      dense_t.push_back(k == dense ? T : h * static_cast<double>(k));
    }
    auto rhs = [&](double, const double* xx, double* dx) { cy(xx, dx); };
    path.push_back(x);
    for (long k = 0; k < dense; ++k) {
      rk4(rhs, x, dense_t[k], dense_t[k + 1], dense_t[k + 1] - dense_t[k]);
      check_finite(dense_t[k + 1], x);
      path.push_back(x);
    }
  }
  out.path_end = path.back();

  std::vector<double> yx(d), fx(d);
  auto l1_residual = [&](const std::vector<double>& x, const std::vector<double>& v) {
    cy(x.data(), yx.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      std::vector<double> r = yx;
      for (std::size_t a = 0; a < nl; ++a) {
        XF[i][a](x.data(), fx.data());
        for (std::size_t k = 0; k < d; ++k) r[k] -= v[a] * fx[k];
      }
      double s = 0.0;
      for (double c : r) s += c * c;
      acc += grid.weights[i] * std::sqrt(s);
    }
    return acc;
  };

  // Weighted least squares at each sample point.
  std::vector<std::vector<double>> vs(nl);
  for (int s = 0; s < samples; ++s) {
    const std::size_t k = static_cast<std::size_t>(s) * options.dense_factor;
    const std::vector<double>& x = path[k];
    out.sample_times.push_back(dense_t[k]);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(nodes * d), static_cast<Eigen::Index>(nl));
    Eigen::VectorXd b(static_cast<Eigen::Index>(nodes * d));
    cy(x.data(), yx.data());
    for (std::size_t i = 0; i < nodes; ++i) {
      double sw = std::sqrt(grid.weights[i]);
      for (std::size_t a = 0; a < nl; ++a) {
        XF[i][a](x.data(), fx.data());
        for (std::size_t c = 0; c < d; ++c) A(static_cast<Eigen::Index>(i * d + c), static_cast<Eigen::Index>(a)) = sw * fx[c];
      }
      for (std::size_t c = 0; c < d; ++c) b(static_cast<Eigen::Index>(i * d + c)) = sw * yx[c];
    }
    std::vector<double> v(nl, 0.0);
    int rank = 0;
    if (nl > 0) {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
      cod.setThreshold(options.rank_tol);
      Eigen::VectorXd sol = cod.solve(b);
      rank = static_cast<int>(cod.rank());
      for (std::size_t a = 0; a < nl; ++a) v[a] = sol(static_cast<Eigen::Index>(a));
    }
    for (std::size_t a = 0; a < nl; ++a) vs[a].push_back(v[a]);
    double res = l1_residual(x, v);
    out.sample_residuals.push_back(res);
    out.max_residual = std::max(out.max_residual, res);
    if (res > options.eps) out.deficient.push_back({static_cast<std::size_t>(s), dense_t[k], rank, res});
  }
  for (std::size_t a = 0; a < nl; ++a) out.v_alpha.push_back(ControlSignal::sampled(out.sample_times, vs[a]));

  auto v_at = [&](double t) {
    std::vector<double> v(nl);
    for (std::size_t a = 0; a < nl; ++a) v[a] = out.v_alpha[a](t);
    return v;
  };
  for (std::size_t k = 0; k < dense_t.size(); ++k) {
    out.dense_residual = std::max(out.dense_residual, l1_residual(path[k], v_at(dense_t[k])));
  }

  // Spectral norm of the Jacobian of sum_a v_a X_a at x.
  auto jac_norm = [&](std::size_t node, const std::vector<double>& x, const std::vector<double>& v) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < nl; ++a) {
      if (v[a] == 0.0) continue;
      std::vector<double> ja = families[a].fields[node].jacobian(x);
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += v[a] * ja[r * d + c];
      }
    }
    return Eigen::JacobiSVD<Eigen::MatrixXd>(J).singularValues()(0);
  };

  // Extended flows per node against the reference path.
  std::vector<double> ends;
  for (std::size_t i = 0; i < nodes; ++i) {
    std::vector<double> x = x_start;
    auto rhs = [&](double t, const double* xx, double* dx) {
      std::fill(dx, dx + d, 0.0);
      for (std::size_t a = 0; a < nl; ++a) {
        double va = out.v_alpha[a](t);
        if (va == 0.0) continue;
        XF[i][a](xx, fx.data());
        for (std::size_t c = 0; c < d; ++c) dx[c] += va * fx[c];
      }
    };
    for (std::size_t k = 0; k < dense_t.size(); ++k) {
      std::vector<double> v = v_at(dense_t[k]);
      out.lipschitz = std::max(out.lipschitz, jac_norm(i, x, v));
      out.lipschitz = std::max(out.lipschitz, jac_norm(i, path[k], v));
      if (k + 1 < dense_t.size()) {
        rk4(rhs, x, dense_t[k], dense_t[k + 1], dense_t[k + 1] - dense_t[k]);
        check_finite(dense_t[k + 1], x);
      }
    }
    out.terminal_error += grid.weights[i] * euclid(x, out.path_end);
  }
  const double L = out.lipschitz, eps = out.dense_residual;
  out.gronwall_bound = L > 0 ? eps / L * std::expm1(L * T) : eps * T;
  out.gronwall_ok = out.terminal_error <= out.gronwall_bound;
  return out;
}

ConvergenceStudy convergence_study(const std::vector<std::vector<PolyField>>& ensemble,
                                   const ThetaGrid& grid, const ControlSignal& u_e,
                                   const ControlSignal& v_e, const ControlSignal& w_e,
                                   const std::vector<double>& x0, double T,
                                   const std::vector<int>& n_list,
                                   const ConvergenceOptions& options) {
  if (ensemble.size() != grid.size()) throw Error(ErrorKind::kDimensionMismatch, "ensemble size differs from grid");
  for (std::size_t k = 1; k < n_list.size(); ++k) {
    if (n_list[k] <= n_list[k - 1]) throw Error(ErrorKind::kInvalidArgument, "n_list must be increasing");
  }
  if (options.step_ratio < 20.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "step eps^2/" + format_double(options.step_ratio) + " is too coarse; need h <= eps^2/20");
  }
  EnsembleFields extended, reduced;
  for (const auto& sys : ensemble) {
    if (sys.size() != 2) throw Error(ErrorKind::kDimensionMismatch, "each node needs the pair (X, Y)");
    extended.controlled.push_back({sys[0], sys[1], lie_bracket(sys[0], sys[1])});
    reduced.controlled.push_back({sys[0], sys[1]});
  }
  IntegrateOptions only_end;
  only_end.thin = std::numeric_limits<std::size_t>::max();

  ConvergenceStudy out;
  out.reference_end = integrate_ensemble(extended, {u_e, v_e, w_e}, x0, T, options.h_ref, only_end).final_states();
  for (int n : n_list) {
    ReductionPlan plan = reduce_controls(u_e, v_e, w_e, T, n);
    double h = plan.eps * plan.eps / options.step_ratio;
    auto end = integrate_ensemble(reduced, {plan.u_eps, plan.v_eps}, x0, T, h, only_end).final_states();
    out.n.push_back(n);
    out.eps.push_back(plan.eps);
    out.steps.push_back(h);
    out.U_eps_T.push_back(std::abs(plan.U_eps(T)));
    out.errors.push_back(lp_distance(end, out.reference_end, grid, 1));
  }
  // Least-squares slope of log e_n against log eps_n.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 0; k < out.errors.size(); ++k) {
    if (!(out.errors[k] > 0)) continue;
    double lx = std::log(out.eps[k]), ly = std::log(out.errors[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  out.slope = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace ensctl
