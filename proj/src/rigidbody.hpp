#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "poly.hpp"

namespace ensctl {

struct InertiaSpec {
  std::array<double, 3> J{};

  // Validates positivity and pairwise relative gaps >= delta_J.
  static InertiaSpec make(const std::array<double, 3>& J, double delta_J = 1e-9);
};

struct TorqueAxis {
  std::array<double, 3> L{};
  static TorqueAxis make(const std::array<double, 3>& L);
};

enum class Verdict { kGenerating, kSingular, kBorderline };
const char* verdict_name(Verdict v);

struct RNOptions {
  double tau = 1e-10;
  double tau0 = 1e-11;
  bool exact = false;  // exact rational determinant and measure (N <= 3 recommended)
};

// measure = dist(V^{n-1}, span(V^0..V^{n-2})) / (|b| * |A|^{n-1}), with A the
// block-diagonal Lambda operator and b the stacked L; det = measure * scale.
struct RNReport {
  int N = 0;
  double det = 0.0;
  double scale = 0.0;
  double cond = 0.0;
  double measure = 0.0;
  double column_norm_product = 0.0;
  Verdict verdict = Verdict::kSingular;
};

PolyField euler_field(const InertiaSpec& J);
// Constant field (L, ..., L) on R^3.
PolyField constant_torque_field(const TorqueAxis& L);

Eigen::Matrix3d lambda_matrix(const InertiaSpec& J, const TorqueAxis& L);
std::array<Rational, 9> lambda_matrix_exact(const InertiaSpec& J, const TorqueAxis& L);

std::vector<Eigen::Vector3d> bracket_chain(const InertiaSpec& J, const TorqueAxis& L, int m_max);
std::vector<std::array<Rational, 3>> bracket_chain_exact(const InertiaSpec& J, const TorqueAxis& L,
                                                         int m_max);

Eigen::MatrixXd rn_matrix(const std::vector<InertiaSpec>& Js, const TorqueAxis& L);
RNReport build_RN(const std::vector<InertiaSpec>& Js, const TorqueAxis& L,
                  const RNOptions& options = {});

// Exact determinant of a square rational matrix (row-major).
Rational exact_determinant(std::vector<Rational> a, std::size_t n);

struct GenericitySample {
  std::vector<InertiaSpec> Js;
  TorqueAxis L;
  RNReport report;
};

struct GenericityOptions {
  double box_lo = 0.5;
  double box_hi = 3.0;
  double min_gap = 1e-3;
  std::optional<TorqueAxis> forced_L;
  int cross_checks = 10;
  int threads = 1;
  RNOptions rn;
};

struct GenericityResult {
  double fraction_generating = 0.0;
  double min_abs_scaled_det = 0.0;
  std::vector<GenericitySample> samples;
  std::vector<std::size_t> cross_checked;
  int cross_check_mismatches = 0;
};

GenericityResult genericity_mc(int N, int samples, std::uint64_t seed,
                               const GenericityOptions& options = {});

struct ScalingDiagnostic {
  double det_eps = 0.0;
  double det_limit_block = 0.0;
  // det_eps / eps^(0 + 1 + ... + (3N - 4)), which tends to det_limit_block.
  double normalized_det_eps = 0.0;
};

ScalingDiagnostic scaling_diagnostic(const std::vector<InertiaSpec>& Js, const TorqueAxis& L,
                                     double eps, bool exact = false);

struct DriftCheck {
  double norm_drift = 0.0;
  bool div_ok = false;
};

DriftCheck drift_invariants_check(const InertiaSpec& J, const std::array<double, 3>& K0, double T,
                                  double h = 1e-3);

struct RankResult {
  int rank = 0;
  int rows = 0;
  bool full = false;
  std::size_t bracket_count = 0;
  std::vector<double> singular_values;
};

RankResult product_bracket_rank(const std::vector<std::vector<PolyField>>& ensemble,
                                const std::vector<std::vector<double>>& points, int depth,
                                double tau_rank = 1e-10);

}  // namespace ensctl
