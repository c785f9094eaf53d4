#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "common.hpp"
#include "mp.hpp"

namespace ensctl {

enum class SignalKind { kPolynomial, kSinusoid, kSum, kSampled };

// Immutable closed-form time signal. Sinusoids are stored as
// gain * sin(pi * (rate * t + phase)) * envelope(t) so that integer
// half-turn counts are hit exactly; inv_freq_sq = 1 / (pi * rate).
class ControlSignal {
 public:
  ControlSignal();  // zero polynomial

  static ControlSignal polynomial(std::vector<Rational> coeffs);  // ascending powers of t
  static ControlSignal polynomial(const std::vector<double>& coeffs);
  static ControlSignal constant(double c);
  static ControlSignal sinusoid(double gain, double rate, double phase, ControlSignal envelope);
  static ControlSignal sinusoid_inv_freq_sq(double gain, double inv_freq_sq, ControlSignal envelope);
  static ControlSignal sum(std::vector<ControlSignal> terms);
  static ControlSignal sampled(std::vector<double> times, std::vector<double> values,
                               std::optional<std::vector<double>> slopes = std::nullopt);

  SignalKind kind() const;
  double operator()(double t) const;
  // Polynomial (and sums of polynomials) only.
  Mp eval_mp(const Mp& t) const;

  ControlSignal derivative() const;
  // Primitive vanishing at t = 0.
  ControlSignal antiderivative() const;
  ControlSignal scaled(double k) const;

  bool is_polynomial() const;
  bool is_differentiable() const;
  const std::vector<Rational>& poly_coeffs() const;

  double gain() const;
  double rate() const;
  double phase() const;
  double inv_freq_sq() const;
  const ControlSignal& envelope() const;
  const std::vector<ControlSignal>& terms() const;
  const std::vector<double>& times() const;
  const std::vector<double>& values() const;
  const std::optional<std::vector<double>>& slopes() const;

 private:
  struct Data;
  explicit ControlSignal(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  std::shared_ptr<const Data> d_;
};

struct ControlSignal::Data {
  SignalKind kind = SignalKind::kPolynomial;
  std::vector<Rational> coeffs;
  std::vector<double> coeffs_d;
  double gain = 0, rate = 0, phase = 0;
  std::vector<ControlSignal> children;  // envelope or sum terms
  std::vector<double> times, values;
  std::optional<std::vector<double>> slopes;
};

}  // namespace ensctl
