#pragma once

#include "vqm/model.hpp"

#include <string>
#include <vector>

namespace vqm {

// Exact perturbative expansion E(g^2) = sum_m E_m g^(2m) of one labeled level.
// Side::left carries the paper's (+) label (E_0 = N + 1/2), Side::right the
// (-) label (E_0 = -eps + N + 1/2).
struct PerturbativeSeries {
    Rational epsilon;
    int N = 0;
    Side side = Side::left;
    int M = 0;
    std::vector<Rational> coeffs;  // E_0..E_M
};

struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kSeriesOrderCap = 250;

// Rayleigh-Schrodinger/Bender-Wu recursion in the oscillator ladder basis of
// the chosen well, exact rationals throughout. Odd g-order coefficients must
// vanish identically (asserted internally).
PerturbativeSeries compute_series(const Rational& epsilon, int N, Side side, int M);

// b = +eps + 2N (left/plus) or -eps + 2N (right/minus): the Gamma shift of the
// predicted large-order growth A * 3^m * Gamma(b + m + 1).
Real large_order_b(const Real& epsilon, int N, Side side);

// A^(pm)(eps, N) = -(3/pi) 6^b / (N! Gamma(+-eps + 1 + N)); exact zero when
// the denominator Gamma sits at a pole (minus side, integer eps >= N+1).
Real predicted_A(const Real& epsilon, int N, Side side);

// Leading large-order term A * 3^m * Gamma(b + m + 1), no 1/m corrections.
Real predicted_coefficient(const Real& epsilon, int N, Side side, int m);

struct RatioFit {
    bool applicable = true;  // false for identically-zero (SUSY) series
    Real c_hat;              // fitted c in r_m = 3 (m + c)
    Real slope;              // coefficient of the 1/m nuisance term
    Real rms_residual;
};

// Fits r_m = E_m / E_{m-1} = 3 (m + c) over [m_lo, m_hi] by least squares on
// r_m/3 - m with a 1/m nuisance regressor; c_hat -> +-eps + 2N as m_hi grows.
RatioFit ratio_diagnostic(const PerturbativeSeries& s, int m_lo, int m_hi);

struct AExtract {
    Real estimate;
    Real error_bar;  // spread of the last two extrapolation orders kept
    int order_used = 0;
};

// Richardson-extrapolates a_m = E_m / (3^m Gamma(b+m+1)) in 1/m over the
// window. Orders are climbed while consecutive estimates keep agreeing
// better (capped); the plain 0..3 ladder under-resolves large |b|, where the
// 1/m corrections are still O(1) at m ~ 200. Rational-to-float conversion is
// done at m_hi*log10(3 m_hi) + 50 digits so the division keeps the signal.
AExtract extract_A(const PerturbativeSeries& s, int m_lo, int m_hi);

// CSV of one level's exact coefficients, rows (m, numerator, denominator),
// preceded by a "# {...}" JSON metadata line with epsilon as p/q, N, side
// (plus/minus), and M. Returns the path written.
std::string export_series_csv(const PerturbativeSeries& s, const std::string& path);

} // namespace vqm
