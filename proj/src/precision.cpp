#include "vqm/precision.hpp"

#include <mpfr.h>

namespace vqm {

Real pi_real() {
    Real r;
    mpfr_const_pi(r.backend().data(), MPFR_RNDN);
    return r;
}

Real euler_gamma_real() {
    Real r;
    mpfr_const_euler(r.backend().data(), MPFR_RNDN);
    return r;
}

Real to_real(const Rational& r) {
    return Real(r);
}

} // namespace vqm
