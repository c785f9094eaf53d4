#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "control.hpp"
#include "grid.hpp"
#include "poly.hpp"

namespace ensctl {

// states is laid out as [time][node][dim].
struct TrajectoryRecord {
  std::vector<double> times;
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::vector<double> states;
  std::optional<std::vector<double>> controls_sampled;  // [time][control]

  const double* state(std::size_t time_index, std::size_t node) const {
    return states.data() + (time_index * nodes + node) * dim;
  }
  std::vector<double> final_states() const;  // [node][dim]
};

// Per-node fields: an optional uncontrolled drift plus r control fields.
struct EnsembleFields {
  std::vector<PolyField> drift;                  // empty or one per node
  std::vector<std::vector<PolyField>> controlled; // [node][j]
};

struct IntegrateOptions {
  std::size_t thin = 1;  // keep every thin-th step (the endpoint is always kept)
  bool sample_controls = false;
};

using Rhs = std::function<void(double t, const double* x, double* dx)>;

// Classical RK4 with constant step h; the last step is shortened to land on T.
// observer(t, x) is called at t0 and after every step.
void rk4(const Rhs& f, std::vector<double>& x, double t0, double T, double h,
         const std::function<void(double, const std::vector<double>&)>& observer = {});

// RK4 with exactly n equal steps, any scalar type.
template <class T, class F>
std::vector<T> rk4_steps(const F& f, std::vector<T> x, const T& t0, const T& t1, long n) {
  const std::size_t d = x.size();
  std::vector<T> k1(d), k2(d), k3(d), k4(d), tmp(d);
  T h = T((t1 - t0) / n);
  T half = T(h / 2);
  for (long s = 0; s < n; ++s) {
    T t = T(t0 + h * s);
    T tm = T(t + half);
    f(t, x, k1);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + half * k1[i];
    f(tm, tmp, k2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + half * k2[i];
    f(tm, tmp, k3);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    f(T(t + h), tmp, k4);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
  }
  return x;
}

TrajectoryRecord integrate_ensemble(const EnsembleFields& fields,
                                    const std::vector<ControlSignal>& controls,
                                    const std::vector<double>& x0, double T, double h,
                                    const IntegrateOptions& options = {});

double lp_distance(const std::vector<double>& states, const std::vector<double>& target,
                   const ThetaGrid& grid, int p);

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec, const ThetaGrid& grid);

}  // namespace ensctl
