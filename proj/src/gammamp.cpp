#include "vqm/gammamp.hpp"

#include <mpfr.h>
#include <vector>

namespace vqm {

Real gamma_real(const Real& x) {
    Real r;
    mpfr_gamma(r.backend().data(), x.backend().data(), MPFR_RNDN);
    return r;
}

Real lgamma_real(const Real& x) {
    Real r;
    int sign;
    mpfr_lgamma(r.backend().data(), &sign, x.backend().data(), MPFR_RNDN);
    return r;
}

Real digamma_real(const Real& x) {
    Real r;
    mpfr_digamma(r.backend().data(), x.backend().data(), MPFR_RNDN);
    return r;
}

namespace {

// Spouge coefficients for the current working precision. The error of the
// a-term approximation is roughly (2*pi)^(-a), so a ~ digits/log10(2*pi) + a
// few guard terms. Cached per (a, precision) since root finding evaluates
// gamma many times at a fixed precision.
struct SpougeTable {
    unsigned a = 0;
    unsigned digits = 0;
    std::vector<Real> c;
};

const SpougeTable& spouge_table() {
    thread_local SpougeTable tab;
    unsigned digits = Real::default_precision();
    unsigned a = static_cast<unsigned>(digits / 0.79) + 4;
    if (tab.a == a && tab.digits == digits) return tab;

    tab.a = a;
    tab.digits = digits;
    tab.c.assign(a, Real(0));
    // c_0 = sqrt(2*pi); c_k = (-1)^(k-1) (a-k)^(k-1/2) e^(a-k) / (k-1)!
    tab.c[0] = sqrt(2 * pi_real());
    Real fact(1);
    for (unsigned k = 1; k < a; ++k) {
        if (k > 1) fact *= Real(k - 1);
        Real ak(a - k);
        Real term = exp((Real(k) - Real(0.5)) * log(ak) + ak) / fact;
        tab.c[k] = (k % 2 == 1) ? term : -term;
    }
    return tab;
}

// ln Gamma(z+1) for Re(z) >= -1/2 (Spouge's form).
Cx lgamma1p_spouge(const Cx& z) {
    const SpougeTable& tab = spouge_table();
    Cx acc(tab.c[0]);
    for (unsigned k = 1; k < tab.a; ++k)
        acc = acc + Cx(tab.c[k]) / (z + Cx(Real(k)));
    Cx za = z + Cx(Real(tab.a));
    return (z + Cx(Real(0.5))) * log(za) - za + log(acc);
}

} // namespace

Cx lgamma_cx(const Cx& z) {
    if (z.re < Real(0.5)) {
        // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        return log(Cx(pi_real()) / sin_pi(z)) - lgamma_cx(Cx(Real(1)) - z);
    }
    // Gamma(z) = Gamma(z+1)/z
    return lgamma1p_spouge(z - Cx(Real(1)));
}

Cx gamma_cx(const Cx& z) {
    if (z.im == 0 && z.re > 0) return Cx(gamma_real(z.re));
    if (z.re < Real(0.5)) {
        return Cx(pi_real()) / (sin_pi(z) * gamma_cx(Cx(Real(1)) - z));
    }
    return exp(lgamma1p_spouge(z - Cx(Real(1))));
}

Cx digamma_cx(const Cx& z) {
    if (z.im == 0) return Cx(digamma_real(z.re));
    if (z.re < Real(0.5)) {
        // psi(z) = psi(1-z) - pi cot(pi z)
        return digamma_cx(Cx(Real(1)) - z) -
               Cx(pi_real()) * (cos_pi(z) / sin_pi(z));
    }
    // Derivative of the Spouge form: psi(z) = d/dw ln Gamma(w+1) at w = z-1.
    const SpougeTable& tab = spouge_table();
    Cx w = z - Cx(Real(1));
    Cx acc(tab.c[0]), dacc(Real(0));
    for (unsigned k = 1; k < tab.a; ++k) {
        Cx d = w + Cx(Real(k));
        Cx t = Cx(tab.c[k]) / d;
        acc = acc + t;
        dacc = dacc - t / d;
    }
    Cx wa = w + Cx(Real(tab.a));
    return log(wa) + (w + Cx(Real(0.5))) / wa - Cx(Real(1)) + dacc / acc;
}

} // namespace vqm
