#pragma once

#include "vqm/complexmp.hpp"
#include "vqm/model.hpp"

#include <stdexcept>
#include <utility>
#include <vector>

namespace vqm {

// g^2 = g2_abs * exp(i*theta), theta in [0, pi]. Every complex power and log
// of (-2/g^2) flows through branch_power/branch_log so the branch is decided
// exactly once: (-2/g^2)^x = (2/g2_abs)^x * exp(i x (pi - theta)). At theta=0
// that is arg(-1) = +pi; at theta=pi the base is real positive.
struct BranchedCoupling {
    Real g2_abs;
    Real theta;
    explicit BranchedCoupling(const Real& g2_abs_, const Real& theta_ = Real(0))
        : g2_abs(g2_abs_), theta(theta_) {}
};

Cx coupling_cx(const BranchedCoupling& bc);   // g^2 as a complex number
Cx branch_log(const BranchedCoupling& bc);    // ln(-2/g^2)
Cx branch_power(const BranchedCoupling& bc, const Cx& x);  // (-2/g^2)^x

struct IntegerEpsilon : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PoleOfGamma : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergentIntegral : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct QuadratureFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NPLabel { plus, minus, degenerate };

struct NPLevel {
    Real epsilon;
    int N = 0;
    NPLabel label = NPLabel::plus;
    int sign = 0;             // +1/-1 for the degenerate pair, 0 otherwise
    Cx energy;
    Cx alpha2_coefficient;    // a^(+-), or the order-alpha^2 block
    Real alpha1_coefficient;  // degenerate splitting coefficient, else 0
};

// alpha = e^{-1/(6 g^2)} / (g sqrt(pi)) for real g^2 > 0.
Real alpha(const Real& g2);

// alpha^2 = e^{-1/(3 g^2)} / (pi g^2) continued to complex g^2; real at
// theta = 0 and real (negative) at theta = pi.
Cx alpha2_branched(const BranchedCoupling& bc);

// phi(s) = 1 - alpha^2 (-2/g^2)^{2s+eps} Gamma(-s-eps) Gamma(-s).
// Throws PoleOfGamma when -s or -s-eps sits within 10^{-digits/2} of a
// non-positive integer; roots near the poles are found via find_np_levels,
// which works with the entire rescaling of phi instead.
Cx phi(const Cx& s, const Real& epsilon, const BranchedCoupling& bc);

// Checks the factorized-integral step: integral over R of
// exp((s+eps) R + (2/g^2) e^{-R}) against (-2/g^2)^{s+eps} Gamma(-s-eps).
// Requires theta = pi, Re(s+eps) < 0, Re(s) < 0. Returns {quadrature, closed}.
std::pair<Cx, Cx> gamma_integral_check(const Cx& s, const Real& epsilon,
                                       const BranchedCoupling& bc);

// E = (1/2 + N) + a^(+) alpha^2 (plus) or (-eps + 1/2 + N) + a^(-) alpha^2
// (minus), a^(+-) = ((-1)^{N+1}/N!) Gamma(-+eps - N) (-2/g^2)^{+-eps + 2N}.
// Integer eps throws IntegerEpsilon except on the minus side with N < eps,
// where the level has no partner to become degenerate with and the Gamma
// factor stays finite.
NPLevel np_energy_generic(const Real& epsilon, int N, Side side,
                          const BranchedCoupling& bc);

// eps = N0 exactly: E = 1/2 + N +- alpha sqrt((2/g^2)^{2N+N0}/(N!(N+N0)!))
//   + (alpha^2/2)(2/g^2)^{2N+N0}/(N!(N+N0)!) (2 ln(-2/g^2) + 2 gamma_E
//     - H_N - H_{N+N0}).
NPLevel np_energy_degenerate(int N0, int N, int sign, const BranchedCoupling& bc);

struct NPRoot {
    Cx s;
    Cx energy;  // s + 1/2
    NPLabel family = NPLabel::plus;
    int seed_N = 0;
    int sign = 0;        // which member of a degenerate pair
    bool converged = false;
    int iterations = 0;
    Real residual;       // |phi| at the returned point
};

// Zeros of phi with Re(s) in [s_lo, s_hi]. Newton runs on the entire function
// chi(s) = 1/(Gamma(-s)Gamma(-s-eps)) - alpha^2 (-2/g^2)^{2s+eps}, which is
// phi times the reciprocal gammas, so seeds can sit exactly on the Gamma
// poles s = N and s = -eps + N. Non-convergence is reported per root.
std::vector<NPRoot> find_np_levels(const Real& epsilon, const BranchedCoupling& bc,
                                   const Real& s_lo, const Real& s_hi);

// Dispersion-relation estimate of the m-th series coefficient:
// z_m = -(1/pi) integral over z=g^2 of Im E_NP(z) / z^{m+1}, quadrature in
// u = 1/(3z). Must reproduce predicted_coefficient up to O(1/m).
Real large_order_bridge(const Real& epsilon, int N, Side side, int m);

// JSON export of a level list: [{epsilon, N, label, re, im, alpha, g2}, ...]
// with alpha and g2 recording the real coupling the energies were computed
// at. Returns the path written.
std::string export_np_levels_json(const std::vector<NPLevel>& levels,
                                  const BranchedCoupling& bc, const std::string& path);

} // namespace vqm
