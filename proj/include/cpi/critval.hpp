#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cpi/lp.hpp"
#include "cpi/model.hpp"
#include "cpi/moments.hpp"

namespace cpi {

/// Per-bootstrap monotonicity cache for the root search: feasibility of
/// Lambda^b is monotone in c, so once psi_b is known on either side of the
/// current bracket the LP can be skipped.
struct PsiCache {
    std::vector<double> feasible_at;    // smallest c known feasible (inf if none)
    std::vector<double> infeasible_at;  // largest c known infeasible (-inf if none)

    explicit PsiCache(int b)
        : feasible_at(b, kInf), infeasible_at(b, -kInf) {}
};

/// Everything theta-independent that a critical-value evaluation needs.
struct CritvalContext {
    const MomentModel* model = nullptr;
    const EmpiricalMoments* moments = nullptr;
    const BootstrapEnsemble* boot = nullptr;
    const ParameterSpace* space = nullptr;
    VectorXd p;
    const Options* opts = nullptr;
    double sqrt_n = 0.0;
    bool use_cache = true;
    int workers = 1;
};

struct CritvalResult {
    double c_hat = 0.0;
    long lp_count = 0;
};

/// Asymptotic Bonferroni upper bracket Phi^{-1}(1 - alpha / j_kept).
double bonferroni_bound(double alpha, int j_kept);

/// Calibrated critical value by Brent-Dekker root finding on
/// Psi_alpha(c) = (1/B) sum_b psi_b(c) - (1 - alpha) over [0, cbar].
CritvalResult calibrated_critval(const VectorXd& theta, const CritvalContext& ctx);

/// Andrews-Soares-style comparison value: the (1-alpha) empirical quantile
/// over b of the max bootstrap deviation across kept, non-GMS-deleted
/// moments, floored at zero.
double as_critval(const VectorXd& theta, const CritvalContext& ctx);

/// Dispatches on opts->method.
CritvalResult critval(const VectorXd& theta, const CritvalContext& ctx);

inline constexpr double kBdmTol = 1e-4;

} // namespace cpi
