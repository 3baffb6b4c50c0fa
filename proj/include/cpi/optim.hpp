#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cpi/model.hpp"
#include "cpi/rng.hpp"

namespace cpi {

/// Smooth inequality-constrained problem on a box with optional linear rows:
///   min f(x)  s.t.  c_i(x) <= 0,  lin_a x <= lin_b,  lb <= x <= ub.
/// Objective and constraints must supply analytic first derivatives.
struct NlpProblem {
    std::function<double(const VectorXd& x, VectorXd* grad)> objective;
    int n_ineq = 0;
    // vals: n_ineq entries; jac (if non-null): n_ineq x dim
    std::function<void(const VectorXd& x, VectorXd& vals, MatrixXd* jac)> constraints;
    VectorXd lb, ub;
    MatrixXd lin_a;   // 0 rows when absent
    VectorXd lin_b;

    int dim() const { return static_cast<int>(lb.size()); }
};

struct LocalSolution {
    VectorXd x;
    double objective = kInf;
    double kkt_residual = kInf;
    double max_constraint_violation = kInf;  // nonlinear + linear rows (box is exact)
    bool converged = false;
};

inline constexpr double kNlpFeasTol = 1e-7;

/// Augmented-Lagrangian outer loop with projected Barzilai-Borwein inner
/// steps. Box bounds are honored exactly by projection. Returns the best
/// iterate with KKT residual <= 1e-6, or converged = false at the cap.
LocalSolution solve_local(const NlpProblem& prob, const VectorXd& start);

struct MultistartResult {
    LocalSolution best;
    int best_start = -1;              // deterministic tie-breaking
    bool found = false;               // false: no feasible local solution
    std::vector<LocalSolution> all;   // per-start outcomes
};

MultistartResult multistart(const NlpProblem& prob, const MatrixXd& starts, int workers = 1);

MatrixXd draw_uniform_box(const VectorXd& lb, const VectorXd& ub, int count, RngStream& rng);

struct DrawResult {
    MatrixXd points;       // accepted rows (may be fewer than requested)
    bool underfilled = false;
};

/// Rejection sampling of {lb <= theta <= ub, poly rows, extra rows} from the
/// bound-transformed enclosing box. Throws "polytope too thin" when the
/// attempt budget (1e6) produces no acceptances at all.
DrawResult draw_and_discard(const ParameterSpace& space, const BoundTransform& bound_transform,
                            int count, RngStream& rng, const MatrixXd& extra_a = MatrixXd(),
                            const VectorXd& extra_b = VectorXd());

/// Context for positive-expected-improvement seeding of the M-step.
struct EiSeedContext {
    std::function<double(const VectorXd&)> ei;           // acquisition value
    std::function<VectorXd(RngStream&)> draw_candidate;  // contracted-space sampler
    VectorXd theta_star;
    VectorXd q;              // unit search direction
    double gap = 0.0;        // q'theta_dagger - q'theta_star
    const ParameterSpace* space = nullptr;
};

struct EiSeeds {
    MatrixXd starts;
    bool reached_min = false;
};

/// Draws candidates from the contracted space (falling back to a shrinking
/// ball around theta_star) keeping those with EI > 0, and always appends
/// theta_star perturbed along +q as a last-resort start.
EiSeeds seed_positive_ei(const EiSeedContext& ctx, int min_count, RngStream& rng);

} // namespace cpi
