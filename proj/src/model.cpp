#include "vqm/model.hpp"

namespace vqm {

Real potential(const ModelParams& p, const Real& q) {
    Real u = 1 - p.g * q;
    return q * q * u * u / 2 - p.epsilon * p.g * q;
}

Real potential_deriv(const ModelParams& p, const Real& q, int k) {
    // V = q^2/2 - g q^3 + g^2 q^4 / 2 - eps g q
    const Real& g = p.g;
    switch (k) {
        case 1: return q - 3 * g * q * q + 2 * g * g * q * q * q - p.epsilon * g;
        case 2: return 1 - 6 * g * q + 6 * g * g * q * q;
        case 3: return -6 * g + 12 * g * g * q;
        case 4: return 12 * g * g;
        default: throw std::invalid_argument("potential_deriv: k must be 1..4");
    }
}

bool two_wells(const ModelParams& p) {
    return p.epsilon * p.g2() < sqrt(Real(3)) / 18;
}

namespace {

// In x = g q the stationarity condition is P(x) = x(1-x)(1-2x) = w with
// w = eps g^2. P has a local max sqrt(3)/18 at x = (3-sqrt(3))/6 and the
// symmetric local min at (3+sqrt(3))/6, which brackets the three roots.
Real solve_p_equals_w(const Real& w, const Real& lo, const Real& hi, int digits) {
    auto P = [](const Real& x) { return x * (1 - x) * (1 - 2 * x); };
    auto dP = [](const Real& x) { return 1 - 6 * x + 6 * x * x; };

    Real a = lo, b = hi;
    Real fa = P(a) - w;
    // Bisect until the bracket is small, then polish with Newton. Newton from
    // the bracket midpoint alone can escape the shallow well near the
    // degenerate boundary.
    for (int it = 0; it < 40; ++it) {
        Real m = (a + b) / 2;
        Real fm = P(m) - w;
        if ((fa < 0) == (fm < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Real x = (a + b) / 2;
    Real tol = pow(Real(10), -digits + 2);
    for (int it = 0; it < 200; ++it) {
        Real step = (P(x) - w) / dP(x);
        x -= step;
        if (abs(step) < tol * (abs(x) + 1)) break;
    }
    return x;
}

} // namespace

std::pair<WellLocation, WellLocation> find_minima(const ModelParams& p) {
    PrecisionGuard guard(p.precision);
    Real w = p.epsilon * p.g2();
    Real s3 = sqrt(Real(3));
    if (w >= s3 / 18)
        throw DegeneratePotential("find_minima: eps*g^2 >= sqrt(3)/18, wells merge");

    Real xmax = (3 - s3) / 6;  // local max of P
    Real xmin = (3 + s3) / 6;  // local min of P
    Real xl = solve_p_equals_w(w, Real(-0.25), xmax, p.precision);
    Real xr = solve_p_equals_w(w, xmin, Real(1.75), p.precision);

    auto make = [&](Side side, const Real& x) {
        WellLocation loc;
        loc.side = side;
        loc.q_star = x / p.g;
        loc.omega = sqrt(potential_deriv(p, loc.q_star, 2));
        loc.depth = potential(p, loc.q_star);
        return loc;
    };
    return {make(Side::left, xl), make(Side::right, xr)};
}

std::vector<Rational> well_position_series(const Rational& epsilon, Side side, int order) {
    // Invert P(x) = w as a power series x = sum a_j w^j about the relevant
    // root, then substitute w = eps g^2 and divide by g, so q* picks up only
    // odd powers of g: c_{2j-1} = a_j eps^j.
    //
    // Left well, about x=0: x - 3x^2 + 2x^3 = w gives
    //   a_j = 3 [x^2]_j - 2 [x^3]_j  (j >= 2), a_1 = 1.
    // Right well, about x=1 (x = 1+y): y + 3y^2 + 2y^3 = w gives
    //   b_j = -3 [y^2]_j - 2 [y^3]_j  (j >= 2), b_1 = 1.
    int jmax = order / 2 + 1;
    std::vector<Rational> a(jmax + 1, Rational(0));
    a[1] = 1;
    Rational sq_sign = (side == Side::left) ? Rational(3) : Rational(-3);
    for (int j = 2; j <= jmax; ++j) {
        Rational x2(0), x3(0);
        for (int i = 1; i < j; ++i) x2 += a[i] * a[j - i];
        for (int i = 1; i < j; ++i)
            for (int k = 1; k < j - i; ++k) x3 += a[i] * a[k] * a[j - i - k];
        a[j] = sq_sign * x2 - 2 * x3;
    }

    // For the right well the leading 1/g of q* = (1+y)/g is not a power
    // series term; the returned coefficients describe the regular part
    // q* - 1/g. The left well has no such offset.
    std::vector<Rational> c(order + 1, Rational(0));
    Rational epow(1);
    for (int j = 1; 2 * j - 1 <= order; ++j) {
        epow *= epsilon;
        c[2 * j - 1] = a[j] * epow;
    }
    return c;
}

} // namespace vqm
