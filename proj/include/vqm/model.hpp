#pragma once

#include "vqm/precision.hpp"

#include <stdexcept>
#include <vector>

namespace vqm {

struct ModelParams {
    Real g;                   // coupling, > 0
    Real epsilon;             // asymmetry, >= 0
    unsigned precision = 50;  // decimal digits for float work
    bool exact_mode = true;   // exact-rational series arithmetic

    Real g2() const { return g * g; }
};

enum class Side { left, right };

struct WellLocation {
    Side side;
    Real q_star;                         // minimum position
    std::vector<Rational> q_star_series; // q* = sum c_k g^k, epsilon folded in
    Real omega;                          // sqrt(V''(q_star))
    Real depth;                          // V(q_star)
};

struct DegeneratePotential : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// V(q) = q^2 (1 - g q)^2 / 2 - eps g q
Real potential(const ModelParams& p, const Real& q);

// k-th derivative of V, k in 1..4 (V is quartic; higher derivatives are zero
// and out of contract).
Real potential_deriv(const ModelParams& p, const Real& q, int k);

// Both wells exist iff eps g^2 < sqrt(3)/18.
bool two_wells(const ModelParams& p);

// Left and right minima, bracketed by bisection and polished by Newton.
// Throws DegeneratePotential when the wells merge.
std::pair<WellLocation, WellLocation> find_minima(const ModelParams& p);

// Formal power series of the well position in g, exact in a rational epsilon.
// Returns coefficients c_0..c_order of q* for the left well, and of q* - 1/g
// for the right well (whose expansion carries a leading 1/g outside the
// series). Only odd k are populated: c_{2j-1} = a_j eps^j.
std::vector<Rational> well_position_series(const Rational& epsilon, Side side, int order);

} // namespace vqm
