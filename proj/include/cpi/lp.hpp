#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cpi/model.hpp"
#include "cpi/moments.hpp"

namespace cpi {

/// Dense inequality system a * x <= b.
struct LinearSystem {
    MatrixXd a;
    VectorXd b;

    int rows() const { return static_cast<int>(a.rows()); }
    int cols() const { return static_cast<int>(a.cols()); }
};

inline constexpr double kFeasTol = 1e-7;

/// Phase-one verdict for min over x of max_i (a_i'x - b_i).
struct PhaseOneResult {
    bool feasible = false;     // optimal violation <= tol
    double max_violation = 0;  // value of the phase-one objective (clipped at 0 from below)
    VectorXd point;            // attaining x
};

/// Decides whether {x : a x <= b} is nonempty by a bounded phase-one simplex
/// (auxiliary variable t bounding the largest violation). Throws
/// std::runtime_error("lp solver stalled...") if the anti-cycling guard trips.
PhaseOneResult phase_one(const LinearSystem& sys, double feas_tol = kFeasTol);

bool is_feasible(const LinearSystem& sys, double feas_tol = kFeasTol);

/// max q'theta over the box-plus-polytope space, by bisection on feasibility.
double max_linear_over_space(const ParameterSpace& space, const VectorXd& q);

/// theta-fixed part of the Lambda^b(theta, rho, c) \cap {p'lambda = 0} system.
/// Row layout: kept & non-deleted moment rows, then 2d merged bound rows,
/// then the two p'lambda rows, then the S polytope rows.
struct LambdaAssembly {
    MatrixXd rows;              // m x d
    VectorXd rhs_base;          // moment rows: -shift_j; other rows: final rhs
    std::vector<int> boot_col;  // per row: stacked ensemble column, or -1
    int n_moment_rows = 0;

    /// Materializes the system for bootstrap row g_row at level c:
    /// moment rhs = c - g_row[boot_col] + rhs_base.
    LinearSystem at(double c, const VectorXd& g_row) const;
};

LambdaAssembly prepare_lambda_assembly(const VectorXd& theta, const MatrixXd& gradient_rows,
                                       const std::vector<char>& keep_rows, const GmsShift& shift,
                                       const ParameterSpace& space, const VectorXd& p,
                                       double sqrt_n, double rho);

/// One-shot assembly of the full constraint system (the contract used by
/// tests; the critical-value loop reuses a LambdaAssembly instead).
LinearSystem assemble_lambda_system(const VectorXd& theta, double c, const VectorXd& boot_row,
                                    const MatrixXd& gradient_rows, const std::vector<char>& keep_rows,
                                    const GmsShift& shift, const ParameterSpace& space,
                                    const VectorXd& p, double sqrt_n, double rho);

} // namespace cpi
