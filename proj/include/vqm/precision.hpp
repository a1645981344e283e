#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

namespace vqm {

using Integer  = boost::multiprecision::mpz_int;
using Rational = boost::multiprecision::mpq_rational;
using Real     = boost::multiprecision::mpfr_float;  // runtime-variable precision

// Scoped override of the default decimal precision for Real. New Real objects
// constructed while the guard is alive pick up the requested precision;
// existing objects keep theirs.
class PrecisionGuard {
public:
    explicit PrecisionGuard(unsigned digits) : saved_(Real::default_precision()) {
        Real::default_precision(digits);
    }
    ~PrecisionGuard() { Real::default_precision(saved_); }
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

private:
    unsigned saved_;
};

// Constants evaluated at the current default precision.
Real pi_real();
Real euler_gamma_real();

Real to_real(const Rational& r);

} // namespace vqm
