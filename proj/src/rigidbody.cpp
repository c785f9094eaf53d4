#include "rigidbody.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <random>
#include <thread>

#include "odesim.hpp"

namespace ensctl {

InertiaSpec InertiaSpec::make(const std::array<double, 3>& J, double delta_J) {
  for (double v : J) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw Error(ErrorKind::kInvalidArgument, "principal values must be positive and finite");
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      double gap = std::abs(J[i] - J[j]) / std::max(J[i], J[j]);
      if (!(gap >= delta_J)) {
        throw Error(ErrorKind::kInvalidArgument,
                    "principal values must be pairwise distinct (relative gap " +
                        format_double(gap) + " < " + format_double(delta_J) + ")");
      }
    }
  }
  return InertiaSpec{J};
}

TorqueAxis TorqueAxis::make(const std::array<double, 3>& L) {
  for (double v : L) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "torque axis must be finite");
  }
  if (L[0] == 0 && L[1] == 0 && L[2] == 0) {
    throw Error(ErrorKind::kInvalidArgument, "torque axis must be nonzero");
  }
  return TorqueAxis{L};
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kGenerating: return "generating";
    case Verdict::kSingular: return "singular";
    case Verdict::kBorderline: return "borderline";
  }
  return "unknown";
}

PolyField euler_field(const InertiaSpec& J) {
  Rational j1 = to_rational(J.J[0]), j2 = to_rational(J.J[1]), j3 = to_rational(J.J[2]);
  Poly k1 = Poly::variable(3, 0), k2 = Poly::variable(3, 1), k3 = Poly::variable(3, 2);
  return PolyField({k2 * k3 * Rational(j3 - j2), k1 * k3 * Rational(j1 - j3), k1 * k2 * Rational(j2 - j1)});
}

PolyField constant_torque_field(const TorqueAxis& L) {
  return PolyField::constant({to_rational(L.L[0]), to_rational(L.L[1]), to_rational(L.L[2])});
}

std::array<Rational, 9> lambda_matrix_exact(const InertiaSpec& J, const TorqueAxis& L) {
  Rational j1 = to_rational(J.J[0]), j2 = to_rational(J.J[1]), j3 = to_rational(J.J[2]);
  Rational l1 = to_rational(L.L[0]), l2 = to_rational(L.L[1]), l3 = to_rational(L.L[2]);
  Rational d[3] = {j3 - j2, j1 - j3, j2 - j1};
  Rational lh[9] = {0, l3, l2, l3, 0, l1, l2, l1, 0};
  std::array<Rational, 9> out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[i * 3 + j] = d[i] * lh[i * 3 + j];
  }
  return out;
}

Eigen::Matrix3d lambda_matrix(const InertiaSpec& J, const TorqueAxis& L) {
  auto q = lambda_matrix_exact(J, L);
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = q[i * 3 + j].get_d();
  }
  return m;
}

std::vector<Eigen::Vector3d> bracket_chain(const InertiaSpec& J, const TorqueAxis& L, int m_max) {
  if (m_max < 0) throw Error(ErrorKind::kInvalidArgument, "m_max must be non-negative");
  Eigen::Matrix3d lam = lambda_matrix(J, L);
  std::vector<Eigen::Vector3d> v{Eigen::Vector3d(L.L[0], L.L[1], L.L[2])};
  for (int m = 1; m <= m_max; ++m) v.push_back(lam * v.back());
  return v;
}

std::vector<std::array<Rational, 3>> bracket_chain_exact(const InertiaSpec& J, const TorqueAxis& L,
                                                         int m_max) {
  if (m_max < 0) throw Error(ErrorKind::kInvalidArgument, "m_max must be non-negative");
  auto lam = lambda_matrix_exact(J, L);
  std::vector<std::array<Rational, 3>> v{
      {to_rational(L.L[0]), to_rational(L.L[1]), to_rational(L.L[2])}};
  for (int m = 1; m <= m_max; ++m) {
    const auto& p = v.back();
    std::array<Rational, 3> next;
    for (int i = 0; i < 3; ++i) next[i] = lam[i * 3] * p[0] + lam[i * 3 + 1] * p[1] + lam[i * 3 + 2] * p[2];
    v.push_back(next);
  }
  return v;
}

Eigen::MatrixXd rn_matrix(const std::vector<InertiaSpec>& Js, const TorqueAxis& L) {
  const int n = 3 * static_cast<int>(Js.size());
  Eigen::MatrixXd R(n, n);
  for (std::size_t b = 0; b < Js.size(); ++b) {
    auto chain = bracket_chain(Js[b], L, n - 1);
    for (int k = 0; k < n; ++k) R.block<3, 1>(3 * static_cast<int>(b), k) = chain[k];
  }
  return R;
}

Rational exact_determinant(std::vector<Rational> a, std::size_t n) {
  if (a.size() != n * n) throw Error(ErrorKind::kDimensionMismatch, "matrix is not square");
  Rational det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && a[p * n + c] == 0) ++p;
    if (p == n) return 0;
    if (p != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[p * n + j], a[c * n + j]);
      det = -det;
    }
    const Rational pivot = a[c * n + c];
    det *= pivot;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (a[r * n + c] == 0) continue;
      Rational f = a[r * n + c] / pivot;
      for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
    }
  }
  return det;
}

namespace {

double lambda_operator_norm(const std::vector<InertiaSpec>& Js, const TorqueAxis& L) {
  double norm = 0.0;
  for (const auto& J : Js) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(lambda_matrix(J, L));
    norm = std::max(norm, svd.singularValues()(0));
  }
  return norm;
}

Verdict classify(double measure, const RNOptions& o) {
  if (measure > o.tau) return Verdict::kGenerating;
  if (measure <= o.tau0) return Verdict::kSingular;
  return Verdict::kBorderline;
}

// Arnoldi on the block-diagonal operator: returns prod h_{k+1,k} / |A| and
// the volume of the first n-1 Krylov columns.
void arnoldi_measure(const std::vector<InertiaSpec>& Js, const TorqueAxis& L, double normA,
                     double& measure, double& vol_head) {
  const int N = static_cast<int>(Js.size());
  const int n = 3 * N;
  std::vector<Eigen::Matrix3d> lam;
  for (const auto& J : Js) lam.push_back(lambda_matrix(J, L));
  Eigen::VectorXd b(n);
  for (int i = 0; i < N; ++i) b.segment<3>(3 * i) = Eigen::Vector3d(L.L[0], L.L[1], L.L[2]);
  double bnorm = b.norm();
  std::vector<Eigen::VectorXd> q{b / bnorm};
  measure = 1.0;
  vol_head = 1.0;
  double tkk = bnorm;  // |b| * prod_{j<=k} h_j
  for (int k = 0; k + 1 < n; ++k) {
    vol_head *= tkk;
    Eigen::VectorXd w(n);
    for (int i = 0; i < N; ++i) w.segment<3>(3 * i) = lam[i] * q[k].segment<3>(3 * i);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& qj : q) w -= qj.dot(w) * qj;
    }
    double h = w.norm();
    if (!(h > 0.0) || normA == 0.0) {
      measure = 0.0;
      return;
    }
    measure *= h / normA;
    tkk *= h;
    q.push_back(w / h);
  }
}

}  // namespace

RNReport build_RN(const std::vector<InertiaSpec>& Js, const TorqueAxis& L, const RNOptions& options) {
  if (Js.empty()) throw Error(ErrorKind::kInvalidArgument, "build_RN needs at least one body");
  RNReport rep;
  rep.N = static_cast<int>(Js.size());
  const int n = 3 * rep.N;
  Eigen::MatrixXd R = rn_matrix(Js, L);
  rep.column_norm_product = 1.0;
  for (int k = 0; k < n; ++k) rep.column_norm_product *= R.col(k).norm();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  auto sv = svd.singularValues();
  rep.cond = sv(n - 1) > 0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();

  const double normA = lambda_operator_norm(Js, L);
  const double bnorm = std::sqrt(static_cast<double>(rep.N)) *
                       std::sqrt(L.L[0] * L.L[0] + L.L[1] * L.L[1] + L.L[2] * L.L[2]);
  double vol_head = 0.0;

  if (options.exact) {
    std::vector<Rational> a(static_cast<std::size_t>(n) * n);
    for (int b = 0; b < rep.N; ++b) {
      auto chain = bracket_chain_exact(Js[b], L, n - 1);
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < 3; ++i) a[static_cast<std::size_t>(3 * b + i) * n + k] = chain[k][i];
      }
    }
    Rational det = exact_determinant(a, n);
    rep.det = det.get_d();
    // Gram determinant of the first n-1 columns.
    std::vector<Rational> gram(static_cast<std::size_t>(n - 1) * (n - 1));
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i; j < n - 1; ++j) {
        Rational s = 0;
        for (int r = 0; r < n; ++r) s += a[static_cast<std::size_t>(r) * n + i] * a[static_cast<std::size_t>(r) * n + j];
        gram[static_cast<std::size_t>(i) * (n - 1) + j] = s;
        gram[static_cast<std::size_t>(j) * (n - 1) + i] = s;
      }
    }
    Rational g = n > 1 ? exact_determinant(gram, n - 1) : Rational(1);
    Rational b2 = 0;
    for (double v : L.L) b2 += to_rational(v) * to_rational(v);
    b2 *= rep.N;
    if (det == 0 || g == 0 || normA == 0.0) {
      rep.measure = 0.0;
    } else {
      Rational ratio = det * det / (g * b2);
      rep.measure = std::sqrt(ratio.get_d()) / std::pow(normA, n - 1);
    }
    vol_head = std::sqrt(g.get_d());
  } else {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(R);
    rep.det = lu.determinant();
    arnoldi_measure(Js, L, normA, rep.measure, vol_head);
  }

  if (rep.measure > 0.0 && rep.det != 0.0) {
    rep.scale = std::abs(rep.det) / rep.measure;
  } else {
    rep.scale = bnorm * vol_head * std::pow(normA, n - 1);
  }
  rep.verdict = classify(rep.measure, options);
  return rep;
}

// ---------------------------------------------------------------- Monte Carlo

namespace {

class SampleRng {
 public:
  SampleRng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    gen_.seed(seq);
  }
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::uint64_t bits() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

GenericitySample draw_sample(int N, std::uint64_t seed, std::uint64_t index,
                             const GenericityOptions& o) {
  SampleRng rng(seed, index);
  GenericitySample s;
  for (int b = 0; b < N; ++b) {
    for (;;) {
      std::array<double, 3> J;
      for (double& v : J) v = o.box_lo + (o.box_hi - o.box_lo) * rng.uniform();
      bool ok = true;
      for (int i = 0; i < 3 && ok; ++i) {
        for (int j = i + 1; j < 3 && ok; ++j) {
          ok = std::abs(J[i] - J[j]) >= o.min_gap * std::max(J[i], J[j]);
        }
      }
      if (ok) {
        s.Js.push_back(InertiaSpec::make(J));
        break;
      }
    }
  }
  if (o.forced_L) {
    s.L = *o.forced_L;
  } else {
    const double pi = boost::math::constants::pi<double>();
    double z = 2.0 * rng.uniform() - 1.0;
    double phi = 2.0 * pi * rng.uniform();
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    s.L = TorqueAxis::make({r * std::cos(phi), r * std::sin(phi), z});
  }
  return s;
}

template <class F>
void parallel_for(std::size_t count, int threads, const F& body) {
  std::size_t t = static_cast<std::size_t>(std::max(1, threads));
  t = std::min(t, std::max<std::size_t>(1, count));
  if (t == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += t) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

GenericityResult genericity_mc(int N, int samples, std::uint64_t seed, const GenericityOptions& o) {
  if (N < 1) throw Error(ErrorKind::kInvalidArgument, "N must be at least 1");
  if (samples < 1) throw Error(ErrorKind::kInvalidArgument, "samples must be at least 1");
  if (!(o.box_hi > o.box_lo) || !(o.box_lo > 0)) {
    throw Error(ErrorKind::kInvalidArgument, "inertia box must be a positive interval");
  }
  GenericityResult res;
  res.samples.resize(static_cast<std::size_t>(samples));
  parallel_for(res.samples.size(), o.threads, [&](std::size_t i) {
    GenericitySample s = draw_sample(N, seed, i, o);
    s.report = build_RN(s.Js, s.L, o.rn);
    res.samples[i] = std::move(s);
  });
  std::size_t generating = 0;
  res.min_abs_scaled_det = std::numeric_limits<double>::infinity();
  for (const auto& s : res.samples) {
    if (s.report.verdict == Verdict::kGenerating) ++generating;
    res.min_abs_scaled_det = std::min(res.min_abs_scaled_det, s.report.measure);
  }
  res.fraction_generating = static_cast<double>(generating) / samples;

  // Exact re-evaluation of a seeded subset.
  std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, o.cross_checks)),
                                           res.samples.size());
  SampleRng pick(seed ^ 0x9e3779b97f4a7c15ULL, 0xc0ffee);
  std::vector<std::size_t> idx(res.samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t j = i + static_cast<std::size_t>(pick.bits() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  res.cross_checked.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(want));
  std::sort(res.cross_checked.begin(), res.cross_checked.end());
  RNOptions exact = o.rn;
  exact.exact = true;
  for (std::size_t i : res.cross_checked) {
    const auto& s = res.samples[i];
    if (build_RN(s.Js, s.L, exact).verdict != s.report.verdict) ++res.cross_check_mismatches;
  }
  return res;
}

// ---------------------------------------------------------------- scaling

ScalingDiagnostic scaling_diagnostic(const std::vector<InertiaSpec>& Js, const TorqueAxis& L,
                                     double eps, bool exact) {
  if (Js.size() < 2) throw Error(ErrorKind::kInvalidArgument, "scaling_diagnostic needs N >= 2");
  if (!(eps > 0.0 && eps <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "eps must lie in (0, 1]");
  const int N = static_cast<int>(Js.size());
  const int n = 3 * N;
  std::vector<InertiaSpec> scaled = Js;
  for (int b = 0; b + 1 < N; ++b) {
    for (double& v : scaled[b].J) v *= eps;
  }
  std::vector<InertiaSpec> head(Js.begin(), Js.end() - 1);
  ScalingDiagnostic out;
  if (exact) {
    auto exact_rn = [&](const std::vector<InertiaSpec>& bodies, double eps_head) {
      const int m = 3 * static_cast<int>(bodies.size());
      Rational e = to_rational(eps_head);
      std::vector<Rational> a(static_cast<std::size_t>(m) * m);
      for (std::size_t b = 0; b < bodies.size(); ++b) {
        auto chain = bracket_chain_exact(bodies[b], L, m - 1);
        bool scale_body = b + 1 < bodies.size();
        Rational f = 1;
        for (int k = 0; k < m; ++k) {
          for (int i = 0; i < 3; ++i) a[(3 * b + i) * m + k] = chain[k][i] * (scale_body ? f : Rational(1));
          f *= e;
        }
      }
      return a;
    };
    // Scaling J by eps scales V^k by eps^k exactly, so the scaled matrix is
    // formed from the unscaled chains.
    auto a = exact_rn(Js, eps);
    out.det_eps = exact_determinant(a, n).get_d();
    auto head_m = exact_rn(head, 1.0);
    Rational det_head = exact_determinant(head_m, n - 3);
    auto full = exact_rn(Js, 1.0);
    std::vector<Rational> corner(9);
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) corner[i * 3 + k] = full[(n - 3 + i) * n + (n - 3 + k)];
    }
    out.det_limit_block = Rational(det_head * exact_determinant(corner, 3)).get_d();
  } else {
    out.det_eps = Eigen::PartialPivLU<Eigen::MatrixXd>(rn_matrix(scaled, L)).determinant();
    double det_head = Eigen::PartialPivLU<Eigen::MatrixXd>(rn_matrix(head, L)).determinant();
    Eigen::MatrixXd full = rn_matrix(Js, L);
    Eigen::Matrix3d corner = full.block<3, 3>(n - 3, n - 3);
    out.det_limit_block = det_head * corner.determinant();
  }
  const int S = (n - 4) * (n - 3) / 2;
  out.normalized_det_eps = out.det_eps / std::pow(eps, S);
  return out;
}

// ---------------------------------------------------------------- drift

DriftCheck drift_invariants_check(const InertiaSpec& J, const std::array<double, 3>& K0, double T,
                                  double h) {
  if (!(T > 0)) throw Error(ErrorKind::kInvalidArgument, "T must be positive");
  DriftCheck out;
  PolyField E = euler_field(J);
  out.div_ok = divergence(E).is_zero();
  EnsembleFields f;
  f.drift = {E};
  std::vector<double> x0(K0.begin(), K0.end());
  TrajectoryRecord rec = integrate_ensemble(f, {}, x0, T, h);
  double n0 = x0[0] * x0[0] + x0[1] * x0[1] + x0[2] * x0[2];
  for (std::size_t t = 0; t < rec.times.size(); ++t) {
    const double* x = rec.state(t, 0);
    out.norm_drift = std::max(out.norm_drift, std::abs(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - n0));
  }
  return out;
}

// ---------------------------------------------------------------- rank

RankResult product_bracket_rank(const std::vector<std::vector<PolyField>>& ensemble,
                                const std::vector<std::vector<double>>& points, int depth,
                                double tau_rank) {
  if (ensemble.empty()) throw Error(ErrorKind::kInvalidArgument, "empty ensemble");
  const std::size_t N = ensemble.size();
  if (points.size() != N && points.size() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "need one point per system or a shared point");
  }
  auto family = iterated_brackets_product(ensemble, depth);
  const std::size_t n = ensemble[0].empty() ? 0 : ensemble[0][0].dim();
  for (const auto& p : points) {
    if (p.size() != n) throw Error(ErrorKind::kDimensionMismatch, "point dim differs from state dim");
  }
  RankResult out;
  out.rows = static_cast<int>(n * N);
  out.bracket_count = family.size();
  if (family.empty()) return out;
  Eigen::MatrixXd M(static_cast<Eigen::Index>(n * N), static_cast<Eigen::Index>(family.size()));
  for (std::size_t c = 0; c < family.size(); ++c) {
    for (std::size_t s = 0; s < N; ++s) {
      auto v = family[c].fields[s].eval(points.size() == 1 ? points[0] : points[s]);
      for (std::size_t i = 0; i < n; ++i) M(static_cast<Eigen::Index>(s * n + i), static_cast<Eigen::Index>(c)) = v[i];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  auto sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) out.singular_values.push_back(sv(i));
  double smax = sv.size() ? sv(0) : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (smax > 0 && sv(i) > tau_rank * smax) ++out.rank;
  }
  out.full = out.rank == out.rows;
  return out;
}

}  // namespace ensctl
