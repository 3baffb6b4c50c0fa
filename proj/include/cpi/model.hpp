#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpi/math.hpp"

namespace cpi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Moment block sizes. Equalities are stored doubled (m <= 0 and -m <= 0),
/// so the stacked row count is j1 + 2*j2.
struct MomentCounts {
    int j1 = 0;   // inequality moments
    int j2 = 0;   // equality moments, before doubling
    int j3 = 0;   // paired-inequality groups

    int total_rows() const { return j1 + 2 * j2; }
    void validate() const;
};

/// Hyperrectangle with optional polytope rows poly_a * theta <= poly_b.
struct ParameterSpace {
    VectorXd lb;
    VectorXd ub;
    MatrixXd poly_a;   // S x d (0 rows when absent)
    VectorXd poly_b;   // S

    int dim() const { return static_cast<int>(lb.size()); }
    int poly_rows() const { return static_cast<int>(poly_a.rows()); }
    bool contains(const VectorXd& theta, double tol = 1e-9) const;
    double diameter() const { return (ub - lb).norm(); }
};

/// Maps an axis-aligned sampling box to a tighter box still enclosing the
/// polytope part of the space (used by draw-and-discard sampling).
using BoundTransform =
    std::function<std::pair<VectorXd, VectorXd>(const VectorXd& lb, const VectorXd& ub)>;

enum class IntervalType { one_sided, two_sided };
enum class CiMethod { calibrated, andrews_soares };

/// Run-wide options. Immutable once a run starts.
struct Options {
    double alpha = 0.05;
    IntervalType interval_type = IntervalType::two_sided;
    CiMethod method = CiMethod::calibrated;
    int b = 301;                                   // bootstrap repetitions

    std::function<double(double)> kappa;           // default sqrt(log n)
    std::function<double(double)> gms;             // default hard threshold; -inf means delete
    double rho = 1e4;                              // radius of the lambda box

    int eam_maxit = 20;
    int eam_minit = 4;
    int mbase = 10;                                // initial design = mbase * d points
    double h_rate = 1.8;
    double h_rate2 = 1.25;
    double eam_obj_tol = 0.005;
    double eam_tol = 1e-4;
    double eam_maxviol_tol = kInf;                 // inf disables convergence criterion 6
    int ei_points = 10;
    double f_keep_threshold = 1e-4;

    std::uint64_t seed = 0;
    int parallel = 1;

    double kappa_value(double n) const;
    double gms_value(double x) const;              // -inf encodes deletion

    /// Baseline simulation profile (the default-constructed values).
    static Options baseline();
    /// Stringent profile for hard designs: more iterations, slower contraction.
    static Options stringent();

    void validate() const;
};

/// Output of MomentModel::f_hat.
struct FhatResult {
    VectorXd f_ineq;                 // j1
    VectorXd f_eq;                   // 2*j2, second half = -first half
    std::vector<char> keep_ineq;     // j1
    std::vector<char> keep_eq;       // 2*j2
    std::vector<int> paired;         // j1 labels; 0 = unpaired, 1..j3 group ids
};

/// A separable moment-inequality model: E[m_j(W,theta)] = E[f_j(W)] + g_j(theta).
/// Implementations must be pure functions of their arguments (they are called
/// concurrently from many workers).
class MomentModel {
public:
    virtual ~MomentModel() = default;

    virtual MomentCounts counts() const = 0;
    virtual int data_cols() const = 0;

    virtual FhatResult f_hat(const MatrixXd& data) const = 0;
    virtual void g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const = 0;
    virtual void g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const = 0;
    virtual void sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
                           VectorXd& sigma_ineq, VectorXd& sigma_eq) const = 0;
};

/// Validated problem: inputs checked, p normalized to unit length.
struct Problem {
    std::shared_ptr<const MomentModel> model;
    MatrixXd data;
    VectorXd theta_0;
    VectorXd p;
    bool p_is_basis = false;
    int basis_index = -1;       // coordinate when p = +-e_k
    ParameterSpace space;
    BoundTransform bound_transform;   // may be empty (identity)
    std::vector<VectorXd> theta_feas; // user-supplied feasible points (may be empty)
    Options opts;

    int dim() const { return static_cast<int>(theta_0.size()); }
    int n() const { return static_cast<int>(data.rows()); }
    double sqrt_n() const { return std::sqrt(static_cast<double>(data.rows())); }
};

/// Checks dimensions, alpha range, membership of theta_0, non-empty interior
/// of the space, and that p is usable; normalizes p. Throws std::invalid_argument.
Problem validate_inputs(std::shared_ptr<const MomentModel> model, const MatrixXd& data,
                        const VectorXd& theta_0, const VectorXd& p, const ParameterSpace& space,
                        const Options& opts, BoundTransform bound_transform = nullptr,
                        std::vector<VectorXd> theta_feas = {});

/// Verifies that the box (and any polytope rows) admit a strictly interior
/// point. Throws std::invalid_argument otherwise.
void validate_space(const ParameterSpace& space);

} // namespace cpi
