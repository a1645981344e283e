#include "vqm/series.hpp"

#include "vqm/gammamp.hpp"

#include "json.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vqm {

namespace {

// Dense ladder-basis vector with one shared denominator: the value attached
// to e_{nlo+i} = (a^dag)^{nlo+i} |0> is c[i]/den. Keeping integers and a
// common denominator avoids the per-operation gcd that plain rationals pay;
// one reduction pass per order keeps den from accreting junk factors.
struct Ladder {
    int nlo = 0;
    Integer den = 1;
    std::vector<Integer> c;
};

void reduce(Ladder& v) {
    using boost::multiprecision::gcd;
    Integer g = v.den;
    for (const auto& x : v.c) {
        if (x == 0) continue;
        g = gcd(g, x);
        if (g == 1) return;
    }
    for (auto& x : v.c) x /= g;
    v.den /= g;
}

// X e_n = n e_{n-1} + e_{n+1} in the unnormalized ladder basis.
Ladder apply_X(const Ladder& v) {
    Ladder out;
    out.nlo = std::max(v.nlo - 1, 0);
    out.den = v.den;
    out.c.assign(v.c.size() + 1 + static_cast<std::size_t>(v.nlo - out.nlo),
                 Integer(0));
    for (std::size_t i = 0; i < v.c.size(); ++i) {
        if (v.c[i] == 0) continue;
        const int n = v.nlo + static_cast<int>(i);
        if (n >= 1) out.c[static_cast<std::size_t>(n - 1 - out.nlo)] += v.c[i] * n;
        out.c[static_cast<std::size_t>(n + 1 - out.nlo)] += v.c[i];
    }
    return out;
}

// rhs += coef * v, assuming v's index range sits inside rhs's.
void add_scaled(Ladder& rhs, const Ladder& v, const Rational& coef) {
    using boost::multiprecision::gcd;
    const Integer p = numerator(coef);
    const Integer vd = v.den * denominator(coef);
    const Integer g = gcd(rhs.den, vd);
    const Integer target = rhs.den / g * vd;
    const Integer a = target / rhs.den;
    const Integer b = target / vd * p;
    if (a != 1)
        for (auto& x : rhs.c) x *= a;
    rhs.den = target;
    const std::size_t off = static_cast<std::size_t>(v.nlo - rhs.nlo);
    for (std::size_t i = 0; i < v.c.size(); ++i) {
        if (v.c[i] == 0) continue;
        rhs.c[off + i] += b * v.c[i];
    }
}

// Bender-Wu recursion for H = H0 + gb U1 + gb^2 U2 around one well, with
// gb = g/sqrt(2), U1 = -(X^3 + 2 eps X)/2, U2 = X^4 / 4. Returns Ehat_0..Ehat_K
// where E(g^2) in physical units is sum_m Ehat_{2m} (g^2/2)^m.
std::vector<Rational> bender_wu(const Rational& eps, int N, int K) {
    std::vector<Ladder> psis(static_cast<std::size_t>(K) + 1);
    std::vector<Rational> E(static_cast<std::size_t>(K) + 1, Rational(0));
    psis[0].nlo = N;
    psis[0].c = {Integer(1)};
    E[0] = Rational(2 * N + 1, 2);

    for (int k = 1; k <= K; ++k) {
        // psi^k spans [N-3k, N+3k]: each gb-order applies at most X^3
        Ladder rhs;
        rhs.nlo = std::max(0, N - 3 * k);
        const int nhi = N + 3 * k;
        rhs.c.assign(static_cast<std::size_t>(nhi - rhs.nlo) + 1, Integer(0));

        // -U1 psi^{k-1} = (X^3 psi)/2 + eps X psi
        const Ladder x1 = apply_X(psis[static_cast<std::size_t>(k - 1)]);
        const Ladder x3 = apply_X(apply_X(x1));
        add_scaled(rhs, x3, Rational(1, 2));
        add_scaled(rhs, x1, eps);

        // -U2 psi^{k-2} = -(X^4 psi)/4
        if (k >= 2) {
            const Ladder y4 =
                apply_X(apply_X(apply_X(apply_X(psis[static_cast<std::size_t>(k - 2)]))));
            add_scaled(rhs, y4, Rational(-1, 4));
        }

        // energy back-reaction from lower even orders
        for (int j = 2; j < k; j += 2) {
            if (E[static_cast<std::size_t>(j)] != 0)
                add_scaled(rhs, psis[static_cast<std::size_t>(k - j)],
                           E[static_cast<std::size_t>(j)]);
        }

        const Rational Ek(-rhs.c[static_cast<std::size_t>(N - rhs.nlo)], rhs.den);
        E[static_cast<std::size_t>(k)] = Ek;
        if (k % 2 == 1) assert(Ek == 0 && "odd perturbative orders must vanish");

        // psi^k_n = rhs_n / (n - N); route the divisions through their lcm so
        // the ladder keeps one shared denominator, then strip common factors.
        using boost::multiprecision::lcm;
        Ladder& psi = psis[static_cast<std::size_t>(k)];
        psi.nlo = rhs.nlo;
        Integer L = 1;
        for (std::size_t i = 0; i < rhs.c.size(); ++i) {
            const int n = rhs.nlo + static_cast<int>(i);
            if (n == N || rhs.c[i] == 0) continue;
            L = lcm(L, Integer(n > N ? n - N : N - n));
        }
        psi.den = rhs.den * L;
        psi.c.assign(rhs.c.size(), Integer(0));
        for (std::size_t i = 0; i < rhs.c.size(); ++i) {
            const int n = rhs.nlo + static_cast<int>(i);
            if (n == N || rhs.c[i] == 0) continue;
            psi.c[i] = rhs.c[i] * (L / (n - N));
        }
        reduce(psi);
    }
    return E;
}

Real pm_epsilon(const Real& epsilon, Side side) {
    return side == Side::left ? epsilon : Real(-epsilon);
}

bool is_nonpositive_integer(const Real& x) {
    using boost::multiprecision::floor;
    return x <= 0 && floor(x) == x;
}

} // namespace

PerturbativeSeries compute_series(const Rational& epsilon, int N, Side side, int M) {
    if (M < 0 || N < 0) throw std::invalid_argument("compute_series: N, M must be >= 0");
    if (M > kSeriesOrderCap)
        throw CapExceeded("compute_series: order cap " + std::to_string(kSeriesOrderCap) +
                          " exceeded");

    const Rational eps_engine = (side == Side::left) ? epsilon : Rational(-epsilon);
    const std::vector<Rational> Ehat = bender_wu(eps_engine, N, 2 * M);

    PerturbativeSeries out;
    out.epsilon = epsilon;
    out.N = N;
    out.side = side;
    out.M = M;
    out.coeffs.resize(static_cast<std::size_t>(M) + 1);
    Rational pow2(1);
    for (int m = 0; m <= M; ++m) {
        out.coeffs[static_cast<std::size_t>(m)] = Ehat[static_cast<std::size_t>(2 * m)] / pow2;
        pow2 *= 2;
    }
    // The right-well expansion is around q = 1/g where the tilt contributes a
    // constant -eps; the engine works in the shifted frame without it.
    if (side == Side::right) out.coeffs[0] -= epsilon;
    return out;
}

Real large_order_b(const Real& epsilon, int N, Side side) {
    return pm_epsilon(epsilon, side) + 2 * N;
}

Real predicted_A(const Real& epsilon, int N, Side side) {
    const Real pe = pm_epsilon(epsilon, side);
    const Real garg = pe + 1 + N;
    if (is_nonpositive_integer(garg)) return Real(0);  // Gamma pole: growth turned off
    const Real b = pe + 2 * N;
    Real nfact(1);
    for (int j = 2; j <= N; ++j) nfact *= j;
    using boost::multiprecision::pow;
    return Real(-3) / pi_real() * pow(Real(6), b) / (nfact * gamma_real(garg));
}

Real predicted_coefficient(const Real& epsilon, int N, Side side, int m) {
    const Real b = large_order_b(epsilon, N, side);
    using boost::multiprecision::pow;
    return predicted_A(epsilon, N, side) * pow(Real(3), m) * gamma_real(b + m + 1);
}

RatioFit ratio_diagnostic(const PerturbativeSeries& s, int m_lo, int m_hi) {
    if (m_lo < 1 || m_hi <= m_lo || m_hi > s.M)
        throw std::invalid_argument("ratio_diagnostic: need 1 <= m_lo < m_hi <= M");

    RatioFit fit;
    for (int m = m_lo - 1; m <= m_hi; ++m) {
        if (s.coeffs[static_cast<std::size_t>(m)] == 0) {
            fit.applicable = false;  // truncated/supersymmetric series: no growth to fit
            return fit;
        }
    }

    // r_m / 3 - m = c + slope/m + O(1/m^2); exact rational ratios, float fit.
    const int n = m_hi - m_lo + 1;
    Real S01(0), S11(0), b0(0), b1(0);
    std::vector<Real> ys(static_cast<std::size_t>(n));
    for (int m = m_lo; m <= m_hi; ++m) {
        const Rational r = s.coeffs[static_cast<std::size_t>(m)] /
                           s.coeffs[static_cast<std::size_t>(m - 1)];
        const Real y = to_real(r) / 3 - m;
        const Real x1 = Real(1) / m;
        ys[static_cast<std::size_t>(m - m_lo)] = y;
        S01 += x1;
        S11 += x1 * x1;
        b0 += y;
        b1 += y * x1;
    }
    const Real det = Real(n) * S11 - S01 * S01;
    fit.c_hat = (S11 * b0 - S01 * b1) / det;
    fit.slope = (Real(n) * b1 - S01 * b0) / det;

    Real ss(0);
    for (int m = m_lo; m <= m_hi; ++m) {
        const Real resid =
            ys[static_cast<std::size_t>(m - m_lo)] - fit.c_hat - fit.slope / m;
        ss += resid * resid;
    }
    using boost::multiprecision::sqrt;
    fit.rms_residual = sqrt(ss / n);
    return fit;
}

AExtract extract_A(const PerturbativeSeries& s, int m_lo, int m_hi) {
    if (m_lo < 1 || m_hi <= m_lo + 1 || m_hi > s.M)
        throw std::invalid_argument("extract_A: need 1 <= m_lo, m_lo+2 <= m_hi <= M");

    // The raw coefficients reach ~ 3^m Gamma(b+m+1); divide them out at a
    // precision that leaves ample headroom for the extrapolation arithmetic.
    const int digits =
        static_cast<int>(std::ceil(m_hi * std::log10(3.0 * m_hi))) + 50;
    PrecisionGuard guard(static_cast<unsigned>(digits));

    const Real b = large_order_b(to_real(s.epsilon), s.N, s.side);
    const int n = m_hi - m_lo + 1;
    std::vector<Real> T(static_cast<std::size_t>(n));
    bool all_zero = true;
    using boost::multiprecision::pow;
    for (int m = m_lo; m <= m_hi; ++m) {
        const Rational& Em = s.coeffs[static_cast<std::size_t>(m)];
        if (Em != 0) all_zero = false;
        T[static_cast<std::size_t>(m - m_lo)] =
            to_real(Em) / (pow(Real(3), m) * gamma_real(b + m + 1));
    }

    AExtract out;
    if (all_zero) {
        out.estimate = Real(0);
        out.error_bar = Real(0);
        return out;
    }

    // Richardson ladder in 1/m: T^k_m = (m T^{k-1}_m - (m-k) T^{k-1}_{m-1}) / k
    // kills the 1/m^k tail term by term. Pick the order where consecutive
    // estimates pinch tightest; past that point roundoff takes over.
    const int k_max = std::min(12, n - 1);
    Real best_est = T[static_cast<std::size_t>(n - 1)];
    Real best_gap(0);
    int best_k = 0;
    Real prev_est = best_est;
    bool have_best = false;
    using boost::multiprecision::abs;
    for (int k = 1; k <= k_max; ++k) {
        for (int m = m_hi; m >= m_lo + k; --m) {
            const std::size_t i = static_cast<std::size_t>(m - m_lo);
            T[i] = (m * T[i] - (m - k) * T[i - 1]) / k;
        }
        const Real est = T[static_cast<std::size_t>(n - 1)];
        const Real gap = abs(est - prev_est);
        if (!have_best || gap < best_gap) {
            best_est = est;
            best_gap = gap;
            best_k = k;
            have_best = true;
        }
        prev_est = est;
    }

    out.estimate = best_est;
    out.error_bar = best_gap;
    out.order_used = best_k;
    return out;
}

std::string export_series_csv(const PerturbativeSeries& s, const std::string& path) {
    nlohmann::ordered_json meta;
    std::ostringstream eps;
    eps << numerator(s.epsilon) << '/' << denominator(s.epsilon);
    meta["epsilon"] = eps.str();
    meta["N"] = s.N;
    meta["side"] = s.side == Side::left ? "plus" : "minus";
    meta["M"] = s.M;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("export_series_csv: cannot open " + path);
    f << "# " << meta.dump() << "\r\n";
    f << "m,numerator,denominator\r\n";
    for (std::size_t m = 0; m < s.coeffs.size(); ++m)
        f << m << ',' << numerator(s.coeffs[m]) << ',' << denominator(s.coeffs[m]) << "\r\n";
    return path;
}

} // namespace vqm
