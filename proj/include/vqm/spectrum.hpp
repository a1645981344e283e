#pragma once

#include "vqm/model.hpp"

#include <stdexcept>
#include <vector>

namespace vqm {

// Symmetric banded matrix, upper bands stored: band[d-1][i] = <i|H|i+d>.
// The Hamiltonian is quartic in q, so the half bandwidth is 4.
struct BandedSymmetric {
    int n = 0;
    int half_bandwidth = 0;
    std::vector<Real> diag;
    std::vector<std::vector<Real>> band;

    Real at(int i, int j) const;
};

struct SpectrumResult {
    ModelParams params;
    int basis_size = 0;
    Real center;
    Real scale;
    std::vector<Real> eigenvalues;   // ascending
    std::vector<Real> convergence;   // change under the last basis doubling
};

struct NotConverged : std::runtime_error {
    std::vector<Real> last;  // estimates at the final basis size
    std::vector<Real> prev;  // estimates at half that size
    NotConverged(const std::string& msg, std::vector<Real> last_, std::vector<Real> prev_)
        : std::runtime_error(msg), last(std::move(last_)), prev(std::move(prev_)) {}
};

// Oscillator-basis matrix of H = p^2/2 + V(q), q expanded about `center` with
// basis frequency `scale`.
BandedSymmetric build_hamiltonian(const ModelParams& params, int basis_size,
                                  const Real& center, const Real& scale);

// Lowest k eigenvalues by Sturm bisection (LDL^T inertia counts) on the
// banded matrix. Exact within bisection tolerance; no tridiagonalization
// needed at bandwidth 4.
std::vector<Real> sturm_lowest(const BandedSymmetric& A, int k, const Real& bisect_tol);

// Doubles the basis from 64 up to 2048 until every reported eigenvalue moves
// less than `tolerance`; throws NotConverged with the last two estimate sets
// otherwise. center/scale < 0 pick the defaults (midpoint of the wells, 1).
SpectrumResult eigenvalues_lowest(const ModelParams& params, int k, const Real& tolerance,
                                  Real center = Real(-1), Real scale = Real(-1));

// E_num[level] - zeroth for a converged spectrum.
Real delta_E(const ModelParams& params, int level, const Real& zeroth,
             const Real& tolerance);

// CSV rows (g2, level, E, convergence), one row per eigenvalue, one block
// per run. Returns the path written.
std::string export_spectrum_csv(const std::vector<SpectrumResult>& runs,
                                const std::string& path);

} // namespace vqm
