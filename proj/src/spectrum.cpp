#include "vqm/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace vqm {

Real BandedSymmetric::at(int i, int j) const {
    if (i > j) std::swap(i, j);
    const int d = j - i;
    if (d == 0) return diag[static_cast<std::size_t>(i)];
    if (d > half_bandwidth) return Real(0);
    return band[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(i)];
}

namespace {

// General banded matrix, e[i][j - i + bw] holds (i,j); used only to form the
// small powers of the position operator.
struct GenBand {
    int n = 0;
    int bw = 0;
    std::vector<std::vector<Real>> e;

    GenBand(int n_, int bw_)
        : n(n_), bw(bw_),
          e(static_cast<std::size_t>(n_),
            std::vector<Real>(static_cast<std::size_t>(2 * bw_ + 1), Real(0))) {}

    Real get(int i, int j) const {
        if (i < 0 || j < 0 || i >= n || j >= n || j - i + bw < 0 || j - i > bw)
            return Real(0);
        return e[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - i + bw)];
    }
    void set(int i, int j, const Real& v) {
        e[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - i + bw)] = v;
    }
};

GenBand band_mult(const GenBand& A, const GenBand& B) {
    GenBand C(A.n, A.bw + B.bw);
    for (int i = 0; i < A.n; ++i) {
        for (int j = std::max(0, i - C.bw); j <= std::min(A.n - 1, i + C.bw); ++j) {
            Real s(0);
            const int klo = std::max({0, i - A.bw, j - B.bw});
            const int khi = std::min({A.n - 1, i + A.bw, j + B.bw});
            for (int k = klo; k <= khi; ++k) s += A.get(i, k) * B.get(k, j);
            C.set(i, j, s);
        }
    }
    return C;
}

} // namespace

BandedSymmetric build_hamiltonian(const ModelParams& params, int basis_size,
                                  const Real& center, const Real& scale) {
    if (basis_size < 4) throw std::invalid_argument("build_hamiltonian: basis_size >= 4");
    if (scale <= 0) throw std::invalid_argument("build_hamiltonian: scale > 0");
    const int n = basis_size;
    using boost::multiprecision::sqrt;

    // position fluctuation y = q - center in the ladder basis of frequency `scale`
    GenBand Y(n, 1);
    for (int i = 0; i + 1 < n; ++i) {
        const Real t = sqrt(Real(i + 1) / (2 * scale));
        Y.set(i, i + 1, t);
        Y.set(i + 1, i, t);
    }
    const GenBand Y2 = band_mult(Y, Y);
    const GenBand Y3 = band_mult(Y2, Y);
    const GenBand Y4 = band_mult(Y2, Y2);

    // V(center + y) = v0 + v1 y + v2 y^2 + v3 y^3 + v4 y^4 exactly (quartic V)
    const Real v0 = potential(params, center);
    const Real v1 = potential_deriv(params, center, 1);
    const Real v2 = potential_deriv(params, center, 2) / 2;
    const Real v3 = potential_deriv(params, center, 3) / 6;
    const Real v4 = potential_deriv(params, center, 4) / 24;

    BandedSymmetric H;
    H.n = n;
    H.half_bandwidth = 4;
    H.diag.assign(static_cast<std::size_t>(n), Real(0));
    H.band.assign(4, {});
    for (int d = 1; d <= 4; ++d)
        H.band[static_cast<std::size_t>(d - 1)].assign(static_cast<std::size_t>(n - d),
                                                       Real(0));

    for (int i = 0; i < n; ++i) {
        Real diag = scale * (2 * i + 1) / 4;  // <i|p^2/2|i>
        diag += v0 + v1 * Y.get(i, i) + v2 * Y2.get(i, i) + v3 * Y3.get(i, i) +
                v4 * Y4.get(i, i);
        H.diag[static_cast<std::size_t>(i)] = diag;
        for (int d = 1; d <= 4 && i + d < n; ++d) {
            Real off = v1 * Y.get(i, i + d) + v2 * Y2.get(i, i + d) +
                       v3 * Y3.get(i, i + d) + v4 * Y4.get(i, i + d);
            if (d == 2) off -= scale * sqrt(Real(i + 1) * Real(i + 2)) / 4;  // <i|p^2/2|i+2>
            H.band[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(i)] = off;
        }
    }
    return H;
}

namespace {

// Number of eigenvalues of A below x: negative pivots of the LDL^T
// factorization of A - xI, O(n w^2) per sweep.
int count_below(const BandedSymmetric& A, const Real& x, const Real& tiny) {
    const int n = A.n;
    const int w = A.half_bandwidth;
    std::vector<std::vector<Real>> L(static_cast<std::size_t>(w),
                                     std::vector<Real>(static_cast<std::size_t>(n), Real(0)));
    std::vector<Real> d(static_cast<std::size_t>(n), Real(0));
    int negatives = 0;
    for (int j = 0; j < n; ++j) {
        Real dj = A.diag[static_cast<std::size_t>(j)] - x;
        for (int k = std::max(0, j - w); k < j; ++k) {
            const Real& ljk = L[static_cast<std::size_t>(j - k - 1)][static_cast<std::size_t>(k)];
            dj -= ljk * ljk * d[static_cast<std::size_t>(k)];
        }
        if (dj == 0) dj = -tiny;  // on a pivot boundary: count consistently
        d[static_cast<std::size_t>(j)] = dj;
        if (dj < 0) ++negatives;
        for (int i = j + 1; i <= std::min(n - 1, j + w); ++i) {
            Real s = A.at(i, j);
            for (int k = std::max({0, i - w, j - w}); k < j; ++k)
                s -= L[static_cast<std::size_t>(i - k - 1)][static_cast<std::size_t>(k)] *
                     L[static_cast<std::size_t>(j - k - 1)][static_cast<std::size_t>(k)] *
                     d[static_cast<std::size_t>(k)];
            L[static_cast<std::size_t>(i - j - 1)][static_cast<std::size_t>(j)] = s / dj;
        }
    }
    return negatives;
}

} // namespace

std::vector<Real> sturm_lowest(const BandedSymmetric& A, int k, const Real& bisect_tol) {
    using boost::multiprecision::abs;
    // Gershgorin interval
    Real lo = A.diag[0], hi = A.diag[0];
    for (int i = 0; i < A.n; ++i) {
        Real r(0);
        for (int j = std::max(0, i - A.half_bandwidth);
             j <= std::min(A.n - 1, i + A.half_bandwidth); ++j)
            if (j != i) r += abs(A.at(i, j));
        lo = std::min(lo, Real(A.diag[static_cast<std::size_t>(i)] - r));
        hi = std::max(hi, Real(A.diag[static_cast<std::size_t>(i)] + r));
    }

    const Real tiny = bisect_tol / 1000;
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(k));
    Real level_lo = lo;
    for (int j = 0; j < k; ++j) {
        Real a = level_lo, b = hi;
        while (b - a > bisect_tol) {
            const Real mid = (a + b) / 2;
            if (count_below(A, mid, tiny) >= j + 1)
                b = mid;
            else
                a = mid;
        }
        out.push_back((a + b) / 2);
        level_lo = a;  // eigenvalue j+1 cannot lie below eigenvalue j
    }
    return out;
}

SpectrumResult eigenvalues_lowest(const ModelParams& params, int k, const Real& tolerance,
                                  Real center, Real scale) {
    PrecisionGuard guard(std::max(params.precision, 30u));
    if (scale <= 0) scale = Real(1);
    if (center < 0) {
        try {
            const auto wells = find_minima(params);
            center = (wells.first.q_star + wells.second.q_star) / 2;
        } catch (const DegeneratePotential&) {
            center = Real(1) / (2 * params.g);
        }
    }

    using boost::multiprecision::abs;
    const Real bisect_tol = tolerance / 100;
    std::vector<Real> prev;
    std::vector<Real> cur;
    for (int n = 64; n <= 2048; n *= 2) {
        const BandedSymmetric H = build_hamiltonian(params, n, center, scale);
        cur = sturm_lowest(H, k, bisect_tol);
        if (!prev.empty()) {
            Real worst(0);
            std::vector<Real> conv(static_cast<std::size_t>(k));
            for (int j = 0; j < k; ++j) {
                conv[static_cast<std::size_t>(j)] =
                    abs(cur[static_cast<std::size_t>(j)] - prev[static_cast<std::size_t>(j)]);
                worst = std::max(worst, conv[static_cast<std::size_t>(j)]);
            }
            if (worst < tolerance) {
                SpectrumResult res;
                res.params = params;
                res.basis_size = n;
                res.center = center;
                res.scale = scale;
                res.eigenvalues = cur;
                res.convergence = conv;
                return res;
            }
            if (n == 2048)
                throw NotConverged("eigenvalues_lowest: basis cap 2048 reached", cur, prev);
        }
        prev = cur;
    }
    throw NotConverged("eigenvalues_lowest: basis cap unreachable", cur, prev);
}

Real delta_E(const ModelParams& params, int level, const Real& zeroth,
             const Real& tolerance) {
    const SpectrumResult res = eigenvalues_lowest(params, level + 1, tolerance);
    return res.eigenvalues[static_cast<std::size_t>(level)] - zeroth;
}

std::string export_spectrum_csv(const std::vector<SpectrumResult>& runs,
                                const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("export_spectrum_csv: cannot open " + path);
    f << "g2,level,E,convergence\r\n";
    for (const SpectrumResult& r : runs) {
        const std::string g2 = r.params.g2().str(17, std::ios_base::scientific);
        for (std::size_t k = 0; k < r.eigenvalues.size(); ++k) {
            // eigenvalues at working precision: the nonperturbative splitting
            // can sit 30 digits under the leading term
            f << g2 << ',' << k << ','
              << r.eigenvalues[k].str(40, std::ios_base::scientific) << ','
              << (k < r.convergence.size()
                      ? r.convergence[k].str(3, std::ios_base::scientific)
                      : std::string("0"))
              << "\r\n";
        }
    }
    return path;
}

} // namespace vqm
