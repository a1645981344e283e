#pragma once

#include "vqm/model.hpp"
#include "vqm/series.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vqm {

struct BadConfig : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ScenarioName { case_a, case_b, case_c, case_d, fig3, fig4, valley_profile, custom };

ScenarioName parse_scenario_name(const std::string& s);  // throws BadConfig
std::string to_string(ScenarioName n);

struct ScenarioConfig {
    ScenarioName name = ScenarioName::case_a;
    bool full = false;        // paper-scale grids; default grids are thinned 5x
    std::string out_dir = "out";
    unsigned precision = 50;  // decimal digits for the float pipelines
    int max_order = 200;      // series truncation M
    int workers = 0;          // worker pool size, 0 = hardware concurrency

    // custom grid; also overrides the named cases when non-empty
    std::vector<Rational> epsilon_grid;
    std::vector<int> n_grid;
    std::optional<Side> side;
    std::vector<double> g2_grid;  // fig4 sample couplings, descending

    // valley_profile knobs
    double T = 40.0;
    int grid_size = 0;  // 0 = default: 2001 desk, 4001 full
    int n_samples = 400;
};

// Default working precision: VALLEY_PRECISION from the environment when set
// to a sane digit count, else 50.
unsigned default_precision();

// JSON config: {"scenario": "...", "full": bool, "out": "...", "precision": D,
// "max_order": M, "workers": K, "epsilon_list": [...], "n_list": [...],
// "side": "plus"|"minus", "g2_list": [...], "T": ..., "grid_size": ...,
// "n_samples": ...}. Epsilon entries may be numbers or strings ("2.5", "1/5");
// both are converted to exact rationals.
ScenarioConfig load_config(const std::string& path);

// Decimal or fraction string to exact Rational; throws BadConfig.
Rational rational_from_string(const std::string& s);

// One A-extraction point: exact series, extract_A against predicted_A. When
// the predicted A is exactly zero (minus side, integer eps > N), the pass rule
// is a noise floor, |a_fit| <= 10*error_bar + 1e-8*|A(eps+1/2)|, instead of a
// relative error; rel_err then reports |a_fit| / floor.
struct APoint {
    Rational epsilon;
    int N = 0;
    Side side = Side::right;
    Real a_fit;
    Real a_theory;
    Real error_bar;
    Real rel_err;
    bool theory_zero = false;
    bool pass = false;
    int order_used = 0;
    unsigned digits = 0;  // working precision of the extraction
};
APoint a_extraction_point(const Rational& eps, int N, Side side, int M, double tol_rel);

// One ratio-diagnostic point (cases c, d): fitted c against +-eps + 2N.
struct RatioPoint {
    Rational epsilon;
    int N = 0;
    Side side = Side::right;
    Real c_hat;
    Real c_theory;
    Real rel_err;
    Real rms;
    bool pass = false;
};
RatioPoint ratio_point(const Rational& eps, int N, Side side, int M, double tol_rel);

// One fig4 coupling: diagonalize at eps=2 and compare the nonperturbative
// shifts of the two lowest (SUSY-protected) levels against the valley
// prediction alpha^2 a^(-). dE_num = E_num - (N + 1/2 - 2).
struct Fig4Point {
    double g2 = 0;
    int level = 0;
    Real dE_num;
    Real dE_valley;
    Real ratio;
    unsigned digits = 0;
};
std::vector<Fig4Point> fig4_points(const std::vector<double>& g2_grid, unsigned precision);

struct ScenarioReport {
    bool pass = false;
    std::string failure_table;           // one line per violated tolerance
    std::vector<std::string> artifacts;  // files written, in write order
};

// Runs the scenario, writes CSV/JSON artifacts plus plot data into
// cfg.out_dir, and reports the per-scenario tolerance verdict.
ScenarioReport run_scenario(const ScenarioConfig& cfg);

enum class PlotKind { fig3, fig4, sr_profile };

// Plot-ready CSV derived from an artifact already present in `dir`; returns
// the path written. Throws MissingArtifact when the source is absent.
std::string emit_plotdata(const std::string& dir, PlotKind kind);

}  // namespace vqm
