#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cpi/critval.hpp"
#include "cpi/model.hpp"
#include "cpi/moments.hpp"
#include "cpi/rng.hpp"
#include "cpi/surrogate.hpp"

namespace cpi {

/// One evaluated point: critical value, signed max violation
/// max_j h_j - c_hat, and its positive part.
struct EvalPoint {
    VectorXd theta;
    double c_hat = 0.0;
    double max_violation = 0.0;
    double constraint_violation = 0.0;
    bool feasible = false;
};

/// Shared per-run context: precomputed moments, ensemble, and problem refs.
struct EamContext {
    const Problem* problem = nullptr;
    const EmpiricalMoments* moments = nullptr;
    const BootstrapEnsemble* boot = nullptr;

    CritvalContext critval_ctx() const;
    EvalPoint evaluate(const VectorXd& theta, long* lp_count = nullptr,
                       int workers_override = 0) const;
    std::vector<EvalPoint> evaluate_all(const MatrixXd& thetas, long* lp_count = nullptr) const;
};

struct EamState {
    std::vector<EvalPoint> evaluated;
    std::optional<VectorXd> theta_star;     // feasible best (or fallback, see flag)
    bool theta_star_is_fallback = false;    // least-violating stand-in, never reported feasible
    int counter = 0;                        // contraction exponent
    int iter = 0;
    VectorXd q;
    double opt_dagger = 0.0;                // max over Theta of q'theta
    int internal_feasible_found = 0;        // feasible points discovered inside this run
};

struct ConvergenceReport {
    bool min_iterations = false;       // (1) iter >= eam_minit
    bool ei_projection_small = false;  // (2) |q'theta_Mstep - q'theta_star| < eam_obj_tol
    bool projection_stable = false;    // (3) |q'theta_star - previous| < eam_tol
    bool internal_feasible = false;    // (4) a feasible point was found inside the run
    bool off_contraction_boundary = false;  // (5) farther than 1e-4 from the contracted ceiling
    bool max_violation_small = false;  // (6) |max_j h_j - c_hat| < eam_maxviol_tol (inf disables)
    bool converged = false;
};

ConvergenceReport check_convergence(int iter, double q_theta_mstep, double q_theta_star,
                                    double q_theta_star_prev, int internal_feasible_found,
                                    double contracted_ceiling, double max_violation_at_star,
                                    const Options& opts);

/// Counter rules: +1 when the best projection moved by less than 1e-6 this
/// iteration, then -1 when positive and the best point sits within 1e-4 of
/// the contracted ceiling.
int update_contraction_counter(int counter, double q_theta_star, double q_theta_star_prev,
                               double ceiling);

struct FeasibleSearchResult {
    std::vector<VectorXd> feasible;     // all feasible points found (may be empty)
    std::vector<EvalPoint> evaluated;   // warm-start evaluations for the EAM run
    double best_minmax = kInf;          // best min-max value seen (diagnostic)
    long lp_count = 0;
};

FeasibleSearchResult feasible_search_direct(const EamContext& ctx, RngStream& rng);
FeasibleSearchResult feasible_search_eam(const EamContext& ctx, RngStream& rng);

struct DirectionResult {
    VectorXd theta_hat;
    double optbound = 0.0;       // q'theta_hat
    double c_at_opt = 0.0;
    double cv_at_opt = 0.0;      // positive part of the max violation
    double ei_at_opt = 0.0;      // remaining expected improvement at termination
    bool converged = false;
    bool boundary_warning = false;
    int iterations = 0;
    long lp_count = 0;
    int surrogate_fits = 0;
    double wall_seconds = 0.0;
    std::vector<EvalPoint> evaluated;
    ConvergenceReport last_report;
    std::vector<int> counter_trace;   // contraction exponent after each iteration
};

DirectionResult run_eam(const EamContext& ctx, const VectorXd& q,
                        const std::vector<VectorXd>& theta_feas,
                        const std::vector<EvalPoint>& warm_start, RngStream& rng);

struct RunResult {
    double lower = -kInf;
    double upper = kInf;
    bool two_sided = true;
    DirectionResult dir_up;                   // q = +p
    std::optional<DirectionResult> dir_down;  // q = -p (two-sided only)
    Options opts;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    bool converged = false;
};

/// Full pipeline: precompute moments and the bootstrap ensemble, find a
/// feasible point unless supplied, then run the EAM search in +p (and -p for
/// two-sided intervals). Throws std::runtime_error when both feasible
/// searches fail (message carries the best min-max value found).
RunResult run_interval(const Problem& problem);

/// Contracted-space upper edge q'theta_star + gap / h_rate^counter.
double contracted_ceiling(double q_theta_star, double opt_dagger, double h_rate, int counter);

} // namespace cpi
