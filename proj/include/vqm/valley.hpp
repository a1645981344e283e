#pragma once

#include "vqm/model.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vqm {

// The valley BVPs are solved in the rescaled field x = g q, where the
// potential becomes x^2(1-x)^2/2 - w x with w = eps g^2 and the action
// carries a 1/g^2 prefactor. All fields and actions below are in these
// units: `q` holds x values, `action` holds S g^2.
struct ValleyConfig {
    double T = 0;
    int grid_size = 0;
    double h = 0;
    std::vector<double> tau;
    std::vector<double> q;   // x = g q on the grid
    std::vector<double> F;   // delta S / delta q in the same units
    double lambda = 0;
    double mu = 0;           // translation phase multiplier (eps = 0 only), ~0
    double action = 0;       // S g^2, measured from the left-well floor
    double residual = 0;     // max norm of the discrete valley-equation defect
};

struct ProfileSample {
    double R, S, lambda;
};
struct JacobianSample {
    double t, F, f;  // t = S(R), F = 1/(dS/dR), f = F sqrt(2t) (1/3 - t)
};

struct ValleyProfile {
    std::vector<ProfileSample> samples;     // R descending continuation order
    std::vector<JacobianSample> jacobian;
    bool lambda_monotone = true;  // empirical along the branch; a fold is reported here
    double max_defect = 0;        // worst accepted ||H F - lambda F||_inf / ||F||_inf
};

struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GridTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContinuationStalled : std::runtime_error {
    ValleyProfile partial;
    ContinuationStalled(const std::string& msg, ValleyProfile partial_)
        : std::runtime_error(msg), partial(std::move(partial_)) {}
};

// lambda = 0 valley instanton between the two wells: Newton relaxation of the
// coupled system -q'' + V'(q) = F, -F'' + V''(q) F = lambda F with Dirichlet
// ends at the well positions and the midpoint pinned to fix translation. The
// multiplier column makes the bordered Jacobian regular despite the
// translation near-zero mode. At eps = 0 the F equation is degenerate
// (F -> 0), so the kink is solved with a translation multiplier mu instead.
ValleyConfig solve_valley_instanton(const ModelParams& params, double T = 40.0,
                                    int grid_size = 4001);

// eps = 0 instanton-anti-instanton valley, traced by pseudo-arclength
// continuation from a glued pair at R0 = 10 down to the vacuum. Symmetry
// about tau = 0 is used (half grid, Neumann at 0). Samples record
// (R, S, lambda) with R from the q = 1/(2g) crossings while they exist and
// R = sqrt(2S) once the crossings merge (the two agree where they overlap,
// making R continuous and monotone along the branch).
ValleyProfile trace_valley(const ModelParams& params, double T = 40.0,
                           int grid_size = 4001, int n_samples = 400);

// Jacobian samples from an S(R) profile: dS/dR by centered (three-point,
// nonuniform) differences on interior samples.
std::vector<JacobianSample> jacobian_profile(const ValleyProfile& profile);

// Endpoint extrapolations (f(0), f(1/3)) from the jacobian samples: linear
// fits at the small-t end and over the large-R window.
std::pair<double, double> f_endpoint_estimates(const ValleyProfile& profile);

// Discrete action in the rescaled units on a full grid including boundary
// values: sum (x_{i+1}-x_i)^2/(2h) + h trapz(Vx(x) - Vx(x_floor)).
// Its interior gradient is h (-x'' + Vx'(x)), the discrete valley force.
double discrete_action_x(const std::vector<double>& x, double h, double w,
                         double x_floor);

// Decay rate of |q - q*| in the chosen tail, by least squares over the tail
// window with subleading (tau e^{w tau}, second harmonic) terms included and
// the rate itself optimized by golden section.
double fit_tail_exponent(const ValleyConfig& config, Side side);

// (R, S, lambda) and (t, F, f) CSVs for a traced profile, each headed by a
// "# {...}" JSON config line recording T, grid size, sample request, the
// continuation acceptance tolerance, and the worst accepted defect. Returns
// the two paths written.
std::pair<std::string, std::string> export_valley_csv(const ValleyProfile& profile,
                                                      double T, int grid_size,
                                                      int n_samples,
                                                      const std::string& sr_path,
                                                      const std::string& jac_path);

} // namespace vqm
