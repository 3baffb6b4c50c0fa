#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cpi/model.hpp"
#include "cpi/rng.hpp"

namespace cpi {

/// Theta-independent sample quantities, computed once per run. Dropped
/// moments (keep flag 0) are excluded from every downstream computation;
/// their sigma is set to the inert placeholder 1.
struct EmpiricalMoments {
    VectorXd f_ineq;
    VectorXd f_eq;
    VectorXd sigma_ineq;
    VectorXd sigma_eq;
    std::vector<char> keep_ineq;
    std::vector<char> keep_eq;
    std::vector<int> paired;
    int n = 0;
    MomentCounts counts;

    int kept_rows() const;                       // kept inequality + kept doubled-equality rows
    std::vector<char> keep_stacked() const;      // size j1 + 2*j2
    VectorXd sigma_stacked() const;
    VectorXd f_stacked() const;
};

/// Recentered bootstrap moments G^b_j = sqrt(n) (fhat^b_j - fhat_j) / sigma_j,
/// rows fixed for the whole run. Dropped moments hold zeros.
struct BootstrapEnsemble {
    MatrixXd g_ineq;   // B x j1
    MatrixXd g_eq;     // B x 2*j2

    int b() const { return static_cast<int>(g_ineq.rows()); }
    VectorXd stacked_row(int b_index) const;
};

/// Per-theta GMS shift for the inequality moments. With the default hard
/// threshold every entry is 0 or "deleted"; deletion removes the moment's
/// row from every bootstrap LP at this theta. Equalities never shift.
struct GmsShift {
    VectorXd shift_ineq;             // finite values (0 under the hard threshold)
    std::vector<char> deleted_ineq;  // 1 = removed at this theta

    int j1() const { return static_cast<int>(shift_ineq.size()); }
};

EmpiricalMoments compute_empirical(const MatrixXd& data, const MomentModel& model,
                                   const Options& opts);

BootstrapEnsemble bootstrap_ensemble(const MatrixXd& data, const MomentModel& model,
                                     const EmpiricalMoments& moments, const Options& opts,
                                     std::uint64_t seed, int workers = 1);

/// One recentered bootstrap row for an explicit resample index vector
/// (stacked layout j1 + 2*j2; dropped moments yield zeros).
VectorXd bootstrap_row(const MatrixXd& data, const MomentModel& model,
                       const EmpiricalMoments& moments, const std::vector<int>& indices);

GmsShift gms_shift(const VectorXd& theta, const EmpiricalMoments& moments,
                   const MomentModel& model, const Options& opts);

/// Studentized moment values sqrt(n) (fhat_j + g_j(theta)) / sigma_j for the
/// kept stacked rows (dropped rows yield -inf so they never bind).
VectorXd studentized_moments(const VectorXd& theta, const EmpiricalMoments& moments,
                             const MomentModel& model);

} // namespace cpi
