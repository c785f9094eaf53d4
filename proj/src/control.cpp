#include "control.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/sin_pi.hpp>
#include <cmath>

namespace ensctl {

namespace {

std::vector<double> to_doubles(const std::vector<Rational>& q) {
  std::vector<double> d;
  d.reserve(q.size());
  for (const auto& v : q) d.push_back(v.get_d());
  return d;
}

void trim(std::vector<Rational>& c) {
  while (!c.empty() && c.back() == 0) c.pop_back();
}

}  // namespace

ControlSignal::ControlSignal() : d_(std::make_shared<Data>()) {}

ControlSignal ControlSignal::polynomial(std::vector<Rational> coeffs) {
  auto d = std::make_shared<Data>();
  trim(coeffs);
  d->kind = SignalKind::kPolynomial;
  d->coeffs_d = to_doubles(coeffs);
  d->coeffs = std::move(coeffs);
  return ControlSignal(d);
}

ControlSignal ControlSignal::polynomial(const std::vector<double>& coeffs) {
  std::vector<Rational> q;
  for (double c : coeffs) q.push_back(to_rational(c));
  return polynomial(std::move(q));
}

ControlSignal ControlSignal::constant(double c) { return polynomial(std::vector<double>{c}); }

ControlSignal ControlSignal::sinusoid(double gain, double rate, double phase, ControlSignal envelope) {
  if (!std::isfinite(gain) || !std::isfinite(rate) || !std::isfinite(phase)) {
    throw Error(ErrorKind::kInvalidArgument, "sinusoid parameters must be finite");
  }
  auto d = std::make_shared<Data>();
  d->kind = SignalKind::kSinusoid;
  d->gain = gain;
  d->rate = rate;
  d->phase = phase;
  d->children = {std::move(envelope)};
  return ControlSignal(d);
}

ControlSignal ControlSignal::sinusoid_inv_freq_sq(double gain, double inv_freq_sq, ControlSignal envelope) {
  if (!(inv_freq_sq > 0)) throw Error(ErrorKind::kInvalidArgument, "inv_freq_sq must be positive");
  return sinusoid(gain, 1.0 / (boost::math::constants::pi<double>() * inv_freq_sq), 0.0,
                  std::move(envelope));
}

ControlSignal ControlSignal::sum(std::vector<ControlSignal> terms) {
  auto d = std::make_shared<Data>();
  d->kind = SignalKind::kSum;
  d->children = std::move(terms);
  return ControlSignal(d);
}

ControlSignal ControlSignal::sampled(std::vector<double> times, std::vector<double> values,
                                     std::optional<std::vector<double>> slopes) {
  if (times.empty() || times.size() != values.size()) {
    throw Error(ErrorKind::kInvalidArgument, "sampled signal needs matching, nonempty times and values");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw Error(ErrorKind::kInvalidArgument, "sampled signal times must be strictly increasing");
    }
  }
  if (slopes && slopes->size() != times.size()) {
    throw Error(ErrorKind::kInvalidArgument, "slopes must match sample times");
  }
  auto d = std::make_shared<Data>();
  d->kind = SignalKind::kSampled;
  d->times = std::move(times);
  d->values = std::move(values);
  d->slopes = std::move(slopes);
  return ControlSignal(d);
}

SignalKind ControlSignal::kind() const { return d_->kind; }

static double interp(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
  if (ts.size() == 1 || t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t i = static_cast<std::size_t>(it - ts.begin()) - 1;
  double w = (t - ts[i]) / (ts[i + 1] - ts[i]);
  return vs[i] + w * (vs[i + 1] - vs[i]);
}

double ControlSignal::operator()(double t) const {
  const Data& d = *d_;
  switch (d.kind) {
    case SignalKind::kPolynomial: {
      double r = 0.0;
      for (std::size_t k = d.coeffs_d.size(); k-- > 0;) r = r * t + d.coeffs_d[k];
      return r;
    }
    case SignalKind::kSinusoid:
      return d.gain * boost::math::sin_pi(d.rate * t + d.phase) * d.children[0](t);
    case SignalKind::kSum: {
      double r = 0.0;
      for (const auto& c : d.children) r += c(t);
      return r;
    }
    case SignalKind::kSampled: return interp(d.times, d.values, t);
  }
  return 0.0;
}

Mp ControlSignal::eval_mp(const Mp& t) const {
  const Data& d = *d_;
  if (d.kind == SignalKind::kPolynomial) {
    Mp r = 0;
    for (std::size_t k = d.coeffs.size(); k-- > 0;) r = r * t + to_mp(d.coeffs[k]);
    return r;
  }
  if (d.kind == SignalKind::kSum) {
    Mp r = 0;
    for (const auto& c : d.children) r += c.eval_mp(t);
    return r;
  }
  throw Error(ErrorKind::kUnsupportedInput, "high-precision evaluation needs a polynomial signal");
}

bool ControlSignal::is_polynomial() const { return d_->kind == SignalKind::kPolynomial; }

bool ControlSignal::is_differentiable() const {
  const Data& d = *d_;
  switch (d.kind) {
    case SignalKind::kPolynomial: return true;
    case SignalKind::kSinusoid: return d.children[0].is_differentiable();
    case SignalKind::kSum:
      return std::all_of(d.children.begin(), d.children.end(),
                         [](const ControlSignal& c) { return c.is_differentiable(); });
    case SignalKind::kSampled: return d.slopes.has_value();
  }
  return false;
}

ControlSignal ControlSignal::derivative() const {
  const Data& d = *d_;
  switch (d.kind) {
    case SignalKind::kPolynomial: {
      std::vector<Rational> c;
      for (std::size_t k = 1; k < d.coeffs.size(); ++k) c.push_back(d.coeffs[k] * k);
      return polynomial(std::move(c));
    }
    case SignalKind::kSinusoid: {
      const double pi = boost::math::constants::pi<double>();
      const ControlSignal& env = d.children[0];
      // d/dt [g sin(pi(rt + p)) e] = g pi r cos(...) e + g sin(...) e'
      return sum({sinusoid(d.gain * pi * d.rate, d.rate, d.phase + 0.5, env),
                  sinusoid(d.gain, d.rate, d.phase, env.derivative())});
    }
    case SignalKind::kSum: {
      std::vector<ControlSignal> t;
      for (const auto& c : d.children) t.push_back(c.derivative());
      return sum(std::move(t));
    }
    case SignalKind::kSampled:
      if (!d.slopes) {
        throw Error(ErrorKind::kUnsupportedInput,
                    "sampled signal without slopes is not differentiable");
      }
      return sampled(d.times, *d.slopes);
  }
  return ControlSignal();
}

ControlSignal ControlSignal::antiderivative() const {
  const Data& d = *d_;
  switch (d.kind) {
    case SignalKind::kPolynomial: {
      std::vector<Rational> c{0};
      for (std::size_t k = 0; k < d.coeffs.size(); ++k) c.push_back(d.coeffs[k] / (k + 1));
      return polynomial(std::move(c));
    }
    case SignalKind::kSinusoid: {
      const ControlSignal& env = d.children[0];
      if (!env.is_polynomial()) {
        throw Error(ErrorKind::kUnsupportedInput,
                    "closed-form primitive needs a polynomial envelope");
      }
      if (d.rate == 0.0) {
        return env.scaled(d.gain * boost::math::sin_pi(d.phase)).antiderivative();
      }
      // Repeated integration by parts, terminating on the envelope degree.
      const double w = boost::math::constants::pi<double>() * d.rate;
      std::vector<ControlSignal> terms;
      ControlSignal p = env;
      double scale = d.gain / w;
      for (int k = 0; !p.poly_coeffs().empty(); ++k) {
        terms.push_back(sinusoid(scale, d.rate, d.phase - 0.5 * (k + 1), p));
        p = p.derivative();
        scale = -scale / w;
      }
      ControlSignal f = sum(terms);
      double f0 = f(0.0);
      terms.push_back(constant(-f0));
      return sum(std::move(terms));
    }
    case SignalKind::kSum: {
      std::vector<ControlSignal> t;
      for (const auto& c : d.children) t.push_back(c.antiderivative());
      return sum(std::move(t));
    }
    case SignalKind::kSampled: {
      std::vector<double> acc(d.times.size(), 0.0);
      for (std::size_t i = 1; i < d.times.size(); ++i) {
        acc[i] = acc[i - 1] + 0.5 * (d.times[i] - d.times[i - 1]) * (d.values[i] + d.values[i - 1]);
      }
      return sampled(d.times, std::move(acc), d.values);
    }
  }
  return ControlSignal();
}

ControlSignal ControlSignal::scaled(double k) const {
  const Data& d = *d_;
  switch (d.kind) {
    case SignalKind::kPolynomial: {
      Rational q = to_rational(k);
      std::vector<Rational> c;
      for (const auto& v : d.coeffs) c.push_back(v * q);
      return polynomial(std::move(c));
    }
    case SignalKind::kSinusoid: return sinusoid(d.gain * k, d.rate, d.phase, d.children[0]);
    case SignalKind::kSum: {
      std::vector<ControlSignal> t;
      for (const auto& c : d.children) t.push_back(c.scaled(k));
      return sum(std::move(t));
    }
    case SignalKind::kSampled: {
      std::vector<double> v = d.values;
      for (auto& x : v) x *= k;
      std::optional<std::vector<double>> s = d.slopes;
      if (s) {
        for (auto& x : *s) x *= k;
      }
      return sampled(d.times, std::move(v), std::move(s));
    }
  }
  return ControlSignal();
}

const std::vector<Rational>& ControlSignal::poly_coeffs() const {
  if (d_->kind != SignalKind::kPolynomial) {
    throw Error(ErrorKind::kUnsupportedInput, "signal is not a polynomial");
  }
  return d_->coeffs;
}

double ControlSignal::gain() const { return d_->gain; }
double ControlSignal::rate() const { return d_->rate; }
double ControlSignal::phase() const { return d_->phase; }
double ControlSignal::inv_freq_sq() const {
  return d_->rate == 0.0 ? 0.0 : 1.0 / (boost::math::constants::pi<double>() * d_->rate);
}
const ControlSignal& ControlSignal::envelope() const { return d_->children.at(0); }
const std::vector<ControlSignal>& ControlSignal::terms() const { return d_->children; }
const std::vector<double>& ControlSignal::times() const { return d_->times; }
const std::vector<double>& ControlSignal::values() const { return d_->values; }
const std::optional<std::vector<double>>& ControlSignal::slopes() const { return d_->slopes; }

}  // namespace ensctl
