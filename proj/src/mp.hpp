#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include "common.hpp"

namespace ensctl {

using Mp = boost::multiprecision::mpfr_float;

inline Mp to_mp(const Rational& q) {
  Mp r;
  mpfr_set_q(r.backend().data(), q.get_mpq_t(), MPFR_RNDN);
  return r;
}

// Sets the default working precision for new Mp values and restores the
// previous one on exit.
class MpPrecision {
 public:
  explicit MpPrecision(unsigned digits) : saved_(Mp::default_precision()) {
    Mp::default_precision(digits);
  }
  ~MpPrecision() { Mp::default_precision(saved_); }
  MpPrecision(const MpPrecision&) = delete;
  MpPrecision& operator=(const MpPrecision&) = delete;

 private:
  unsigned saved_;
};

}  // namespace ensctl
