#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "control.hpp"
#include "expr.hpp"
#include "grid.hpp"
#include "poly.hpp"

namespace ensctl {

// Shifted Legendre polynomial in t on [0, 1], Rodrigues normalization.
Poly legendre(int k);

// Integral over [0, 1] of (t^2 - t)^m P_{2r}(t).
Rational gamma_moment(int m, int r);

struct GammaMatrix {
  int M = 0;
  int R = 0;
  Rational eps = 1;
  std::vector<Rational> entries;  // row-major, rows m = 1..M, columns r = 1..R

  const Rational& at(int m, int r) const { return entries[static_cast<std::size_t>((m - 1) * R + (r - 1))]; }
};

// gamma^eps_mr = eps^(m - r) gamma_mr.
GammaMatrix gamma_matrix(int M, int R, const Rational& eps = 1);

struct Projection {
  std::vector<double> c;
  double residual = 0.0;
  double gram_cond = 0.0;
  bool regularized = false;
};

// a: node x m matrix whose column j holds a_{j+1}(theta).
Projection project_target(const Eigen::MatrixXd& a, const std::vector<double>& zhat,
                          const ThetaGrid& grid, int R);

bool epsilon_admissible(double eps, double eps1, int R, double rho, double mu_f, double b_y);

// Largest eps = (rho / 2) 2^-j satisfying the admissibility inequality.
double choose_epsilon(double eps1, int R, double rho, double mu_f, double b_y,
                      double eps_floor = 1e-60);

struct ModelControls {
  ControlSignal u;
  ControlSignal v;
  ControlSignal U;  // primitive of u
};

ModelControls synthesize_controls(const std::vector<double>& y, double eps, int R);

struct TerminalOptions {
  bool ode_check = true;
  double quad_tol = 1e-20;
  int extra_digits = 30;
};

struct TerminalEvaluation {
  std::vector<double> z_quad;
  std::vector<double> z_ode;
  std::vector<double> x1;
  std::vector<double> y1;
  double max_ode_gap = 0.0;
  int digits = 0;
  int quad_points = 0;
  int ode_levels = 0;
};

TerminalEvaluation evaluate_terminal(const Expr& f, const ThetaGrid& grid, const ControlSignal& u,
                                     const ControlSignal& v, const TerminalOptions& options = {});

struct ModelScenario {
  Expr f;
  Expr target;
  ThetaGrid grid;
  double eps1 = 0.1;
  double rho = 1.0;
  double mu_f = 1.0;
  std::optional<int> R;
  int R_max = 12;
  double eps_floor = 1e-60;
  double ode_tolerance = 1e-6;
  double terminal_state_tolerance = 1e-10;
  TerminalOptions terminal;
};

struct SynthesisReport {
  bool ok = false;
  std::string failed_stage;
  std::string message;
  int R = 0;
  double eps1 = 0.0;
  double eps = 0.0;
  std::vector<double> c;
  std::vector<double> y;
  double b_y = 0.0;
  std::vector<double> residual_by_R;
  double projection_residual = 0.0;
  double terminal_error = 0.0;
  double bound_2eps1 = 0.0;
  double perturbation_bound = 0.0;
  bool decomposition_ok = false;
  double mu_f_observed = 0.0;
  std::vector<double> z_target;
  TerminalEvaluation terminal;
  std::optional<ModelControls> controls;
};

SynthesisReport verify_model(const ModelScenario& scenario);

}  // namespace ensctl
