#pragma once

#include <vector>

#include "control.hpp"
#include "grid.hpp"
#include "poly.hpp"

namespace ensctl {

// Fast-oscillation reduction of (u_e, v_e, w_e) to two inputs.
// U_eps = 2 sin(t/eps^2) w_e, vhat = sin(t/eps^2), eps = sqrt(T / (pi n)).
struct ReductionPlan {
  double T = 0.0;
  int n = 0;
  double eps = 0.0;
  ControlSignal u_eps;
  ControlSignal v_eps;
  ControlSignal U_eps;
  ControlSignal vhat;
};

ReductionPlan reduce_controls(const ControlSignal& u_e, const ControlSignal& v_e,
                              const ControlSignal& w_e, double T, int n);

struct FlowDecomposition {
  std::vector<double> lhs_endpoint;
  std::vector<double> rhs_endpoint;
  double gap = 0.0;
};

// x' = f(x) + g u(t) versus the flow of f(. + U(t) g) followed by translation g U(T).
FlowDecomposition flow_decomposition_check(const PolyField& f, const PolyField& g,
                                           const ControlSignal& u, const std::vector<double>& x0,
                                           double T, double h = 1e-4);

struct SteerOptions {
  double eps = 1e-3;        // configured residual level
  int dense_factor = 16;    // integration steps per sample interval
  double rank_tol = 1e-12;  // relative singular value cutoff
};

struct DeficientSample {
  std::size_t index = 0;
  double t = 0.0;
  int rank = 0;
  double residual = 0.0;
};

struct ExtendedSteer {
  std::vector<std::vector<int>> labels;
  std::vector<ControlSignal> v_alpha;  // piecewise linear in t, one per label
  std::vector<double> sample_times;
  std::vector<double> sample_residuals;  // L1(Theta) residual at each sample
  double max_residual = 0.0;             // over samples
  double dense_residual = 0.0;           // over the integration grid, interpolated v
  std::vector<DeficientSample> deficient;
  std::vector<double> path_end;
  double terminal_error = 0.0;  // L1(Theta) distance of extended flows to the path at T
  double lipschitz = 0.0;
  double gronwall_bound = 0.0;
  bool gronwall_ok = false;
};

ExtendedSteer extended_steer(const std::vector<std::vector<PolyField>>& ensemble,
                             const ThetaGrid& grid, const PolyField& Y,
                             const std::vector<double>& x_start, double T, int depth, int samples,
                             const SteerOptions& options = {});

struct ConvergenceOptions {
  double h_ref = 1e-3;     // reference step
  double step_ratio = 40;  // oscillatory runs use h = eps^2 / step_ratio
};

struct ConvergenceStudy {
  std::vector<int> n;
  std::vector<double> eps;
  std::vector<double> errors;
  std::vector<double> U_eps_T;  // |U_eps(T)| per n
  std::vector<double> steps;
  double slope = 0.0;
  std::vector<double> reference_end;  // node-major
};

// ensemble: per node the pair (X, Y); the bracket [X, Y] is formed internally.
ConvergenceStudy convergence_study(const std::vector<std::vector<PolyField>>& ensemble,
                                   const ThetaGrid& grid, const ControlSignal& u_e,
                                   const ControlSignal& v_e, const ControlSignal& w_e,
                                   const std::vector<double>& x0, double T,
                                   const std::vector<int>& n_list,
                                   const ConvergenceOptions& options = {});

}  // namespace ensctl
