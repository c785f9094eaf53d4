#include "odesim.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <ostream>

namespace ensctl {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "grid size must be at least 1");
  const double pi = boost::math::constants::pi<double>();
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        // one more pass for the final derivative
        p0 = 1.0;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        break;
      }
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

ThetaGrid make_grid(GridKind kind, double a, double b, int n) {
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "grid size must be at least 1");
  if (!(b > a)) throw Error(ErrorKind::kInvalidArgument, "grid interval must satisfy a < b");
  ThetaGrid g;
  g.kind = kind;
  g.a = a;
  g.b = b;
  if (kind == GridKind::kGauss) {
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
      g.nodes.push_back(mid + half * x[i]);
      g.weights.push_back(half * w[i]);
    }
  } else if (n == 1) {
    g.nodes = {0.5 * (a + b)};
    g.weights = {b - a};
  } else {
    double h = (b - a) / (n - 1);
    for (int i = 0; i < n; ++i) {
      g.nodes.push_back(i == n - 1 ? b : a + i * h);
      g.weights.push_back((i == 0 || i == n - 1) ? 0.5 * h : h);
    }
  }
  return g;
}

GridKind parse_grid_kind(const std::string& name) {
  if (name == "gauss") return GridKind::kGauss;
  if (name == "uniform") return GridKind::kUniform;
  throw Error(ErrorKind::kInvalidArgument, "grid kind must be 'gauss' or 'uniform'");
}

const char* grid_kind_name(GridKind kind) { return kind == GridKind::kGauss ? "gauss" : "uniform"; }

std::vector<double> TrajectoryRecord::final_states() const {
  if (times.empty()) return {};
  auto first = states.begin() + static_cast<std::ptrdiff_t>((times.size() - 1) * nodes * dim);
  return std::vector<double>(first, states.end());
}

namespace {

// Step boundaries t0 = s_0 < ... < s_m = T with constant h except the last.
std::vector<double> step_times(double t0, double T, double h) {
  if (!(h > 0) || !std::isfinite(h)) throw Error(ErrorKind::kInvalidArgument, "step h must be positive");
  if (!(T >= t0)) throw Error(ErrorKind::kInvalidArgument, "final time precedes start time");
  std::vector<double> s{t0};
  if (T == t0) return s;
  double span = T - t0;
  long n = static_cast<long>(std::floor(span / h));
  double rem = span - n * h;
  if (rem <= 1e-9 * h) rem = 0.0;
  if (n == 0 && rem == 0.0) rem = span;
  for (long k = 1; k <= n; ++k) s.push_back((k == n && rem == 0.0) ? T : t0 + k * h);
  if (rem > 0.0) s.push_back(T);
  return s;
}

}  // namespace

void rk4(const Rhs& f, std::vector<double>& x, double t0, double T, double h,
         const std::function<void(double, const std::vector<double>&)>& observer) {
  const std::size_t d = x.size();
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  std::vector<double> s = step_times(t0, T, h);
  if (observer) observer(s[0], x);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    double t = s[k], hk = s[k + 1] - s[k], hh = 0.5 * hk;
    f(t, x.data(), k1.data());
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + hh * k1[i];
    f(t + hh, tmp.data(), k2.data());
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + hh * k2[i];
    f(t + hh, tmp.data(), k3.data());
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + hk * k3[i];
    f(s[k + 1], tmp.data(), k4.data());
    for (std::size_t i = 0; i < d; ++i) x[i] += hk / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (observer) observer(s[k + 1], x);
  }
}

TrajectoryRecord integrate_ensemble(const EnsembleFields& fields,
                                    const std::vector<ControlSignal>& controls,
                                    const std::vector<double>& x0, double T, double h,
                                    const IntegrateOptions& options) {
  std::size_t nodes = std::max(fields.drift.size(), fields.controlled.size());
  if (nodes == 0) throw Error(ErrorKind::kInvalidArgument, "ensemble has no nodes");
  if (!fields.drift.empty() && fields.drift.size() != nodes) {
    throw Error(ErrorKind::kDimensionMismatch, "drift list length differs from node count");
  }
  if (!fields.controlled.empty() && fields.controlled.size() != nodes) {
    throw Error(ErrorKind::kDimensionMismatch, "controlled field list length differs from node count");
  }
  std::size_t r = fields.controlled.empty() ? 0 : fields.controlled[0].size();
  if (controls.size() != r) {
    throw Error(ErrorKind::kDimensionMismatch, "number of controls differs from field tuple arity");
  }
  const std::size_t dim = x0.size();
  for (std::size_t i = 0; i < nodes; ++i) {
    if (!fields.drift.empty() && fields.drift[i].dim() != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "drift dim differs from x0");
    }
    if (!fields.controlled.empty()) {
      if (fields.controlled[i].size() != r) {
        throw Error(ErrorKind::kDimensionMismatch, "field tuple arity differs between nodes");
      }
      for (const auto& f : fields.controlled[i]) {
        if (f.dim() != dim) throw Error(ErrorKind::kDimensionMismatch, "field dim differs from x0");
      }
    }
  }
  std::size_t thin = std::max<std::size_t>(1, options.thin);

  std::vector<double> s = step_times(0.0, T, h);
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k % thin == 0 || k + 1 == s.size()) kept.push_back(k);
  }

  TrajectoryRecord rec;
  rec.nodes = nodes;
  rec.dim = dim;
  for (std::size_t k : kept) rec.times.push_back(s[k]);
  rec.states.assign(kept.size() * nodes * dim, 0.0);

  std::vector<double> fx(dim), u(r);
  for (std::size_t node = 0; node < nodes; ++node) {
    std::optional<CompiledField> drift;
    if (!fields.drift.empty()) drift.emplace(fields.drift[node]);
    std::vector<CompiledField> cf;
    for (std::size_t j = 0; j < r; ++j) cf.emplace_back(fields.controlled[node][j]);
    Rhs rhs = [&](double t, const double* x, double* dx) {
      if (drift) {
        (*drift)(x, dx);
      } else {
        std::fill(dx, dx + dim, 0.0);
      }
      for (std::size_t j = 0; j < r; ++j) {
        double uj = controls[j](t);
        if (uj == 0.0) continue;
        cf[j](x, fx.data());
        for (std::size_t i = 0; i < dim; ++i) dx[i] += uj * fx[i];
      }
    };
    std::vector<double> x = x0;
    std::size_t step = 0, slot = 0;
    rk4(rhs, x, 0.0, T, h, [&](double t, const std::vector<double>& xs) {
      for (double v : xs) {
        if (!std::isfinite(v)) {
          throw Error(ErrorKind::kDivergence, "non-finite state at t = " + format_double(t) +
                                                  ", node " + std::to_string(node));
        }
      }
      if (slot < kept.size() && kept[slot] == step) {
        std::copy(xs.begin(), xs.end(), rec.states.begin() + static_cast<std::ptrdiff_t>((slot * nodes + node) * dim));
        ++slot;
      }
      ++step;
    });
  }

  if (options.sample_controls && r > 0) {
    std::vector<double> cs;
    for (double t : rec.times) {
      for (const auto& c : controls) cs.push_back(c(t));
    }
    rec.controls_sampled = std::move(cs);
  }
  return rec;
}

double lp_distance(const std::vector<double>& states, const std::vector<double>& target,
                   const ThetaGrid& grid, int p) {
  if (p != 1 && p != 2) throw Error(ErrorKind::kInvalidArgument, "p must be 1 or 2");
  if (grid.size() == 0 || states.size() != target.size() || states.size() % grid.size() != 0) {
    throw Error(ErrorKind::kDimensionMismatch, "state and target shapes must match the grid");
  }
  std::size_t dim = states.size() / grid.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      double d = states[i * dim + k] - target[i * dim + k];
      sq += d * d;
    }
    acc += grid.weights[i] * (p == 1 ? std::sqrt(sq) : sq);
  }
  return p == 1 ? acc : std::sqrt(acc);
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec, const ThetaGrid& grid) {
  if (grid.size() != rec.nodes) throw Error(ErrorKind::kDimensionMismatch, "grid size differs from record");
  os << "t,theta";
  for (std::size_t k = 0; k < rec.dim; ++k) os << ",x" << (k + 1);
  os << "\n";
  for (std::size_t ti = 0; ti < rec.times.size(); ++ti) {
    for (std::size_t node = 0; node < rec.nodes; ++node) {
      os << format_double(rec.times[ti]) << "," << format_double(grid.nodes[node]);
      const double* x = rec.state(ti, node);
      for (std::size_t k = 0; k < rec.dim; ++k) os << "," << format_double(x[k]);
      os << "\n";
    }
  }
}

}  // namespace ensctl
