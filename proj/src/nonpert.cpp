#include "vqm/nonpert.hpp"

#include "vqm/gammamp.hpp"

#include "json.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

namespace vqm {

namespace {

unsigned working_digits() { return Real::default_precision(); }

Real pow10_int(int e) { return boost::multiprecision::pow(Real(10), e); }

Real factorial_real(int n) {
    Real f(1);
    for (int j = 2; j <= n; ++j) f *= j;
    return f;
}

Real harmonic(int n) {
    Real h(0);
    for (int j = 1; j <= n; ++j) h += Real(1) / j;
    return h;
}

bool is_integer(const Real& x) {
    using boost::multiprecision::floor;
    return floor(x) == x;
}

Real sin_pi_real(const Real& x) {
    const long n = nearest_integer(x);
    const Real s = sin(pi_real() * (x - n));
    return (n % 2 == 0) ? s : -s;
}

// Reciprocal gamma 1/Gamma(z), entire; the reflected form keeps full accuracy
// at and near the poles of Gamma, where 1/Gamma has its zeros.
Cx rgamma(const Cx& z) {
    if (z.re >= Real(0.5)) return Cx(Real(1)) / gamma_cx(z);
    return sin_pi(z) * gamma_cx(Cx(Real(1)) - z) / pi_real();
}

Cx rgamma_prime(const Cx& z) {
    if (z.re >= Real(0.5)) return -digamma_cx(z) / gamma_cx(z);
    const Cx g1z = gamma_cx(Cx(Real(1)) - z);
    return cos_pi(z) * g1z - sin_pi(z) * g1z * digamma_cx(Cx(Real(1)) - z) / pi_real();
}

} // namespace

Cx coupling_cx(const BranchedCoupling& bc) {
    return Cx(bc.g2_abs * cos(bc.theta), bc.g2_abs * sin(bc.theta));
}

Cx branch_log(const BranchedCoupling& bc) {
    return Cx(log(Real(2) / bc.g2_abs), pi_real() - bc.theta);
}

Cx branch_power(const BranchedCoupling& bc, const Cx& x) {
    return exp(x * branch_log(bc));
}

Real alpha(const Real& g2) {
    if (g2 <= 0) throw std::invalid_argument("alpha: g^2 must be positive");
    using boost::multiprecision::sqrt;
    return exp(-Real(1) / (6 * g2)) / (sqrt(g2) * sqrt(pi_real()));
}

Cx alpha2_branched(const BranchedCoupling& bc) {
    const Cx g2 = coupling_cx(bc);
    return exp(-(Cx(Real(1)) / (Real(3) * g2))) / (pi_real() * g2);
}

Cx phi(const Cx& s, const Real& epsilon, const BranchedCoupling& bc) {
    const Cx ms = -s;
    const Cx mse = Cx(-(s.re + epsilon), -s.im);
    const Real guard = pow10_int(-static_cast<int>(working_digits() / 2));
    for (const Cx& z : {ms, mse}) {
        const long n = nearest_integer(z.re);
        if (n <= 0 && abs(z - Cx(Real(n))) < guard)
            throw PoleOfGamma("phi: argument within guard distance of a Gamma pole");
    }
    const Cx b = Cx(2 * s.re + epsilon, 2 * s.im);
    return Cx(Real(1)) -
           alpha2_branched(bc) * branch_power(bc, b) * gamma_cx(mse) * gamma_cx(ms);
}

std::pair<Cx, Cx> gamma_integral_check(const Cx& s, const Real& epsilon,
                                       const BranchedCoupling& bc) {
    using boost::multiprecision::abs;
    if (abs(bc.theta - pi_real()) > Real(1e-30))
        throw DivergentIntegral("gamma_integral_check: requires theta = pi");
    if (s.re + epsilon >= 0 || s.re >= 0)
        throw DivergentIntegral("gamma_integral_check: requires Re(s+eps) < 0 and Re(s) < 0");

    const Real a = s.re + epsilon;   // decay rate of the R -> infinity tail
    const Real beta = s.im;
    const Real c = -Real(2) / bc.g2_abs;  // 2/g^2 at theta = pi

    // Full-line integral: the R < 0 side is cut off double-exponentially by
    // exp(c e^{-R}), but it still carries an e^{c} sized piece of the mass.
    boost::math::quadrature::sinh_sinh<Real> quad;
    const Real tol = pow10_int(-static_cast<int>(3 * working_digits() / 4));
    auto kernel = [&](const Real& R) -> Real { return exp(a * R + c * exp(-R)); };
    Real err_re(0), err_im(0);
    const Real num_re = quad.integrate(
        [&](const Real& R) -> Real { return kernel(R) * cos(beta * R); }, tol, &err_re);
    Real num_im(0);
    if (beta != 0)
        num_im = quad.integrate(
            [&](const Real& R) -> Real { return kernel(R) * sin(beta * R); }, tol, &err_im);

    const Cx mse = Cx(-(s.re + epsilon), -s.im);
    const Cx closed = branch_power(bc, Cx(s.re + epsilon, s.im)) * gamma_cx(mse);
    return {Cx(num_re, num_im), closed};
}

NPLevel np_energy_generic(const Real& epsilon, int N, Side side,
                          const BranchedCoupling& bc) {
    if (N < 0) throw std::invalid_argument("np_energy_generic: N must be >= 0");
    const int pm = (side == Side::left) ? +1 : -1;
    if (is_integer(epsilon)) {
        // Minus-side levels below eps have no partner level; the Gamma factor
        // Gamma(eps - N) stays finite and the generic formula remains valid.
        const bool unpaired = (pm == -1) && epsilon >= 1 && Real(N) < epsilon;
        if (!unpaired)
            throw IntegerEpsilon("np_energy_generic: integer eps, use the degenerate form");
    }

    const Real gamma_arg = -pm * epsilon - N;
    const Real K = ((N % 2 == 0) ? Real(-1) : Real(1)) / factorial_real(N) *
                   gamma_real(gamma_arg);
    const Real b = pm * epsilon + 2 * N;
    const Cx a_pm = K * branch_power(bc, Cx(b));

    NPLevel lvl;
    lvl.epsilon = epsilon;
    lvl.N = N;
    lvl.label = (pm == 1) ? NPLabel::plus : NPLabel::minus;
    lvl.alpha2_coefficient = a_pm;
    lvl.alpha1_coefficient = Real(0);
    const Real e0 = (pm == 1) ? Real(N) + Real(1) / 2 : -epsilon + N + Real(1) / 2;
    lvl.energy = Cx(e0) + alpha2_branched(bc) * a_pm;
    return lvl;
}

NPLevel np_energy_degenerate(int N0, int N, int sign, const BranchedCoupling& bc) {
    if (N0 < 0 || N < 0 || (sign != 1 && sign != -1))
        throw std::invalid_argument("np_energy_degenerate: need N0,N >= 0 and sign = +-1");

    using boost::multiprecision::pow;
    using boost::multiprecision::sqrt;
    const Real fac = pow(Real(2) / bc.g2_abs, 2 * N + N0) /
                     (factorial_real(N) * factorial_real(N + N0));
    const Real split = sqrt(fac);
    const Cx block = (fac / 2) *
                     (Real(2) * branch_log(bc) +
                      Cx(2 * euler_gamma_real() - harmonic(N) - harmonic(N + N0)));
    const Real al = alpha(bc.g2_abs);

    NPLevel lvl;
    lvl.epsilon = Real(N0);
    lvl.N = N;
    lvl.label = NPLabel::degenerate;
    lvl.sign = sign;
    lvl.alpha1_coefficient = sign * split;
    lvl.alpha2_coefficient = block;
    lvl.energy = Cx(Real(N) + Real(1) / 2 + sign * al * split) + (al * al) * block;
    return lvl;
}

namespace {

struct ChiEval {
    Cx chi;
    Cx dchi;
    Cx G;  // 1/(Gamma(-s) Gamma(-s-eps)), the entire rescaling factor
};

// chi(s) = G(s) - alpha^2 (-2/g^2)^{2s+eps} with G = rgamma(-s) rgamma(-s-eps);
// chi = G * phi, entire, with an analytic derivative that stays accurate on
// the Gamma poles themselves. Seeding Newton exactly at s = N reproduces the
// residue-expansion step s -> N + a^(+) alpha^2 in one iteration.
ChiEval eval_chi(const Cx& s, const Real& epsilon, const Cx& A2, const Cx& L) {
    const Cx ms = -s;
    const Cx mse = Cx(-(s.re + epsilon), -s.im);
    const Cx R1 = rgamma(ms), R2 = rgamma(mse);
    const Cx G = R1 * R2;
    const Cx Gp = -(rgamma_prime(ms) * R2 + R1 * rgamma_prime(mse));
    const Cx B = exp(Cx(2 * s.re + epsilon, 2 * s.im) * L);
    ChiEval out;
    out.G = G;
    out.chi = G - A2 * B;
    out.dchi = Gp - Real(2) * (A2 * (L * B));
    return out;
}

} // namespace

std::vector<NPRoot> find_np_levels(const Real& epsilon, const BranchedCoupling& bc,
                                   const Real& s_lo, const Real& s_hi) {
    using boost::multiprecision::ceil;
    using boost::multiprecision::floor;
    using boost::multiprecision::pow;
    using boost::multiprecision::sqrt;

    const unsigned digits = working_digits();
    const Real al = alpha(bc.g2_abs);
    if (al > Real(1) / 5)
        std::cerr << "find_np_levels: alpha = " << al.convert_to<double>()
                  << " is not small; pole seeding may be unreliable\n";

    const bool integer_eps = is_integer(epsilon) && epsilon >= 0;
    const int N0 = integer_eps ? static_cast<int>(epsilon) : -1;

    struct Seed {
        Cx s;
        NPLabel family;
        int N;
        int sign;
    };
    std::vector<Seed> seeds;

    const Real lo_plus = ceil(s_lo), hi_plus = floor(s_hi);
    const Real lo_minus = ceil(s_lo + epsilon), hi_minus = floor(s_hi + epsilon);

    // plus family: Gamma(-s) poles at s = N (degenerate pairs when eps = N0)
    for (long N = std::max<long>(0, lo_plus.convert_to<long>());
         N <= hi_plus.convert_to<long>(); ++N) {
        if (integer_eps) {
            const Real delta =
                al * sqrt(pow(Real(2) / bc.g2_abs, 2 * N + N0) /
                          (factorial_real(static_cast<int>(N)) *
                           factorial_real(static_cast<int>(N) + N0)));
            seeds.push_back({Cx(Real(N) - delta), NPLabel::degenerate,
                             static_cast<int>(N), -1});
            seeds.push_back({Cx(Real(N) + delta), NPLabel::degenerate,
                             static_cast<int>(N), +1});
        } else {
            seeds.push_back({Cx(Real(N)), NPLabel::plus, static_cast<int>(N), 0});
        }
    }
    // minus family: Gamma(-s-eps) poles at s = -eps + N; for integer eps only
    // the unpaired N < N0 remain (the rest coincide with the plus poles above)
    for (long N = std::max<long>(0, lo_minus.convert_to<long>());
         N <= hi_minus.convert_to<long>(); ++N) {
        if (integer_eps && N >= N0) continue;
        seeds.push_back({Cx(-epsilon + N), NPLabel::minus, static_cast<int>(N), 0});
    }

    const Cx A2 = alpha2_branched(bc);
    const Cx L = branch_log(bc);
    const Real step_tol = pow10_int(-static_cast<int>(digits) + 8);
    const Real phi_tol = pow10_int(-static_cast<int>(digits / 2));

    std::vector<NPRoot> roots;
    roots.reserve(seeds.size());
    for (const Seed& seed : seeds) {
        NPRoot r;
        r.family = seed.family;
        r.seed_N = seed.N;
        r.sign = seed.sign;

        Cx s = seed.s;
        bool small_step = false;
        int it = 0;
        for (; it < 80; ++it) {
            const ChiEval ev = eval_chi(s, epsilon, A2, L);
            if (abs(ev.dchi) == 0) break;
            const Cx step = ev.chi / ev.dchi;
            s = s - step;
            if (abs(step) < step_tol * (Real(1) + abs(s))) {
                small_step = true;
                break;
            }
        }
        const ChiEval fin = eval_chi(s, epsilon, A2, L);
        r.s = s;
        r.energy = s + Cx(Real(1) / 2);
        r.iterations = it + 1;
        r.residual = (abs(fin.G) > 0) ? abs(fin.chi) / abs(fin.G) : Real(1);
        r.converged = small_step && r.residual < phi_tol;
        roots.push_back(r);
    }

    std::sort(roots.begin(), roots.end(),
              [](const NPRoot& a, const NPRoot& b) { return a.s.re < b.s.re; });
    return roots;
}

Real large_order_bridge(const Real& epsilon, int N, Side side, int m) {
    if (m < 1) throw std::invalid_argument("large_order_bridge: m >= 1");
    const int pm = (side == Side::left) ? +1 : -1;
    const Real b = pm * epsilon + 2 * N;
    if (Real(m) + b <= Real(-1) + Real(1) / 2)
        throw QuadratureFailure("large_order_bridge: integral diverges for m <= -b");

    // Im E_NP(z) = Im(a^(+-)(z)) alpha^2(z)
    //            = Ksb (2/z)^b e^{-1/(3z)} / (pi z)
    // with Ksb = -Gamma(-x) sin(pi x) / N!  and  x = pm eps + N.  At integer x
    // the product reads 0 * inf; reflection gives the limit pi/(N! Gamma(1+x)),
    // exactly zero for x <= -1 (no discontinuity on that branch).
    const Real x = pm * epsilon + N;
    const Real pi = pi_real();
    Real Ksb;
    if (is_integer(x)) {
        if (x <= Real(-1)) return Real(0);
        Ksb = pi / (factorial_real(N) * gamma_real(1 + x));
    } else {
        Ksb = -gamma_real(-x) * sin_pi_real(x) / factorial_real(N);
    }

    // Substituting u = 1/(3z) collapses the dispersion integral over the cut
    // into C int u^{m+b} e^{-u} du.  Evaluate the integrand through a single
    // exponential: the double-exponential abscissas reach u where u^{m+b}
    // overflows while e^{-u} underflows, and 0 * inf poisons the quadrature.
    using boost::multiprecision::pow;
    const Real C = pow(Real(3), m + 1) * pow(Real(6), b) * Ksb / pi;
    const Real p = Real(m) + b;
    auto f = [&](const Real& u) -> Real { return C * exp(p * log(u) - u); };

    boost::math::quadrature::exp_sinh<Real> quad;
    const Real tol = pow10_int(-static_cast<int>(working_digits() / 2));
    Real err(0), l1(0);
    Real val;
    try {
        val = quad.integrate(f, tol, &err, &l1);
    } catch (const std::exception& e) {
        throw QuadratureFailure(std::string("large_order_bridge: ") + e.what());
    }
    if (l1 > 0 && err / l1 > pow10_int(-10))
        throw QuadratureFailure("large_order_bridge: quadrature did not converge");
    return -val / pi;
}

std::string export_np_levels_json(const std::vector<NPLevel>& levels,
                                  const BranchedCoupling& bc, const std::string& path) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    const Real al = alpha(bc.g2_abs);
    for (const NPLevel& l : levels) {
        nlohmann::ordered_json j;
        j["epsilon"] = l.epsilon.convert_to<double>();
        j["N"] = l.N;
        j["label"] = l.label == NPLabel::plus    ? "plus"
                     : l.label == NPLabel::minus ? "minus"
                                                 : "degenerate";
        j["re"] = l.energy.re.convert_to<double>();
        j["im"] = l.energy.im.convert_to<double>();
        j["alpha"] = al.convert_to<double>();
        j["g2"] = bc.g2_abs.convert_to<double>();
        out.push_back(j);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("export_np_levels_json: cannot open " + path);
    f << out.dump(2) << '\n';
    return path;
}

} // namespace vqm
