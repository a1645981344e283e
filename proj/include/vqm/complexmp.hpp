#pragma once

#include "vqm/precision.hpp"

namespace vqm {

// Complex arithmetic over the multiprecision Real. std::complex is specified
// for built-in floating types only, so the handful of operations the secular
// equation needs are implemented directly.
struct Cx {
    Real re, im;

    Cx() : re(0), im(0) {}
    Cx(const Real& r) : re(r), im(0) {}
    Cx(const Real& r, const Real& i) : re(r), im(i) {}
    Cx(double r) : re(r), im(0) {}
    Cx(double r, double i) : re(r), im(i) {}
};

inline Cx operator+(const Cx& a, const Cx& b) { return {a.re + b.re, a.im + b.im}; }
inline Cx operator-(const Cx& a, const Cx& b) { return {a.re - b.re, a.im - b.im}; }
inline Cx operator-(const Cx& a) { return {-a.re, -a.im}; }
inline Cx operator*(const Cx& a, const Cx& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline Cx operator*(const Real& s, const Cx& a) { return {s * a.re, s * a.im}; }
inline Cx operator/(const Cx& a, const Cx& b) {
    Real d = b.re * b.re + b.im * b.im;
    return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
}
inline Cx operator/(const Cx& a, const Real& s) { return {a.re / s, a.im / s}; }

inline Real norm_sq(const Cx& a) { return a.re * a.re + a.im * a.im; }
inline Real abs(const Cx& a) { return sqrt(norm_sq(a)); }
inline Cx conj(const Cx& a) { return {a.re, -a.im}; }

inline Cx exp(const Cx& a) {
    Real m = exp(a.re);
    return {m * cos(a.im), m * sin(a.im)};
}

// Principal branch, arg in (-pi, pi].
inline Cx log(const Cx& a) { return {log(abs(a)), atan2(a.im, a.re)}; }

inline Cx sqrt(const Cx& a) { return exp(Real(0.5) * log(a)); }

inline Cx sin(const Cx& a) {
    return {sin(a.re) * cosh(a.im), cos(a.re) * sinh(a.im)};
}
inline Cx cos(const Cx& a) {
    return {cos(a.re) * cosh(a.im), -sin(a.re) * sinh(a.im)};
}

// r^z for real r > 0: single-valued, no branch decision involved.
inline Cx pow_real_base(const Real& r, const Cx& z) {
    Real lr = log(r);
    return exp(Cx(z.re * lr, z.im * lr));
}

// sin(pi z) and cos(pi z) with the argument reduced about the nearest integer
// to Re(z). Direct sin(pi*z) at z near an integer n loses all digits to the
// rounding of pi*n; the reduced form is exact at integers, which the
// reciprocal-gamma reflection and the secular equation rely on.
inline long nearest_integer(const Real& x) {
    using boost::multiprecision::floor;
    return floor(x + Real(0.5)).convert_to<long>();
}

inline Cx sin_pi(const Cx& z) {
    const long n = nearest_integer(z.re);
    const Cx s = sin(pi_real() * Cx(z.re - n, z.im));
    return (n % 2 == 0) ? s : -s;
}

inline Cx cos_pi(const Cx& z) {
    const long n = nearest_integer(z.re);
    const Cx c = cos(pi_real() * Cx(z.re - n, z.im));
    return (n % 2 == 0) ? c : -c;
}

} // namespace vqm
