#include "cpi/model.hpp"

#include <cmath>
#include <stdexcept>

#include "cpi/lp.hpp"

namespace cpi {

void MomentCounts::validate() const {
    if (j1 < 0 || j2 < 0 || j3 < 0) throw std::invalid_argument("negative moment count");
    if (j3 > j1 / 2) throw std::invalid_argument("more paired groups than inequality pairs");
    if (total_rows() < 1) throw std::invalid_argument("model defines no moments");
}

bool ParameterSpace::contains(const VectorXd& theta, double tol) const {
    if (theta.size() != lb.size()) return false;
    for (int k = 0; k < dim(); ++k)
        if (theta(k) < lb(k) - tol || theta(k) > ub(k) + tol) return false;
    if (poly_rows() > 0) {
        const VectorXd slack = poly_b - poly_a * theta;
        if (slack.minCoeff() < -tol) return false;
    }
    return true;
}

double Options::kappa_value(double n) const {
    if (kappa) return kappa(n);
    return std::sqrt(std::log(n));
}

double Options::gms_value(double x) const {
    if (gms) return gms(x);
    return x >= -1.0 ? 0.0 : -kInf;
}

Options Options::baseline() { return Options{}; }

Options Options::stringent() {
    Options o;
    o.eam_maxit = 50;
    o.h_rate = 1.25;
    o.h_rate2 = 1.15;
    o.eam_obj_tol = 0.0001;
    o.ei_points = 20;
    return o;
}

void Options::validate() const {
    if (!(alpha >= 0.0 && alpha <= 0.5)) throw std::invalid_argument("alpha out of range [0, 0.5]");
    if (b < 1) throw std::invalid_argument("bootstrap repetitions must be >= 1");
    if (!(h_rate > 1.0 && h_rate <= 2.0)) throw std::invalid_argument("h_rate must be in (1, 2]");
    if (!(h_rate2 > 1.0 && h_rate2 <= h_rate))
        throw std::invalid_argument("h_rate2 must be in (1, h_rate]");
    if (eam_minit > eam_maxit) throw std::invalid_argument("eam_minit exceeds eam_maxit");
    if (eam_maxit < 1 || eam_minit < 0) throw std::invalid_argument("bad EAM iteration bounds");
    if (!(eam_obj_tol > 0.0) || !(eam_tol > 0.0) || !(eam_maxviol_tol > 0.0))
        throw std::invalid_argument("EAM tolerances must be positive");
    if (!(f_keep_threshold > 0.0)) throw std::invalid_argument("f_keep_threshold must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    if (mbase < 1) throw std::invalid_argument("mbase must be >= 1");
    if (ei_points < 1) throw std::invalid_argument("ei_points must be >= 1");
    if (parallel < 1) throw std::invalid_argument("parallel must be >= 1");
}

void validate_space(const ParameterSpace& space) {
    const int d = space.dim();
    if (d < 1) throw std::invalid_argument("empty parameter vector");
    if (space.ub.size() != d) throw std::invalid_argument("lb/ub dimension mismatch");
    bool strict = false;
    for (int k = 0; k < d; ++k) {
        if (space.lb(k) > space.ub(k)) throw std::invalid_argument("lb exceeds ub");
        if (space.lb(k) < space.ub(k)) strict = true;
    }
    if (!strict) throw std::invalid_argument("parameter space has empty interior");
    if (space.poly_rows() > 0) {
        if (space.poly_a.cols() != d || space.poly_b.size() != space.poly_a.rows())
            throw std::invalid_argument("polytope rows have wrong shape");
        // Strictly interior point: shrink every constraint by a small margin
        // and ask the LP kernel for a witness.
        const double margin = 1e-8 * (1.0 + (space.ub - space.lb).cwiseAbs().maxCoeff());
        const int s = space.poly_rows();
        LinearSystem sys;
        sys.a.resize(2 * d + s, d);
        sys.b.resize(2 * d + s);
        for (int k = 0; k < d; ++k) {
            sys.a.row(k).setZero();
            sys.a(k, k) = 1.0;
            sys.b(k) = space.ub(k) - margin;
            sys.a.row(d + k).setZero();
            sys.a(d + k, k) = -1.0;
            sys.b(d + k) = -(space.lb(k) + margin);
        }
        sys.a.bottomRows(s) = space.poly_a;
        for (int i = 0; i < s; ++i) {
            const double row_scale = space.poly_a.row(i).cwiseAbs().maxCoeff();
            sys.b(2 * d + i) = space.poly_b(i) - margin * std::max(1.0, row_scale);
        }
        if (!is_feasible(sys))
            throw std::invalid_argument("parameter space has empty interior");
    }
}

Problem validate_inputs(std::shared_ptr<const MomentModel> model, const MatrixXd& data,
                        const VectorXd& theta_0, const VectorXd& p, const ParameterSpace& space,
                        const Options& opts, BoundTransform bound_transform,
                        std::vector<VectorXd> theta_feas) {
    if (!model) throw std::invalid_argument("null model");
    opts.validate();
    validate_space(space);

    const int d = space.dim();
    if (theta_0.size() != d) throw std::invalid_argument("theta_0 dimension mismatch");
    if (p.size() != d) throw std::invalid_argument("p dimension mismatch");
    if (data.rows() < 2) throw std::invalid_argument("need at least 2 observations");
    if (data.cols() != model->data_cols())
        throw std::invalid_argument("data column count does not match the model");
    if (!space.contains(theta_0)) throw std::invalid_argument("theta_0 outside the parameter space");
    for (const auto& tf : theta_feas)
        if (tf.size() != d || !space.contains(tf))
            throw std::invalid_argument("supplied feasible point outside the parameter space");

    const double norm = p.norm();
    if (norm <= 0.0) throw std::invalid_argument("p is all-zero");

    Problem prob;
    prob.model = std::move(model);
    prob.data = data;
    prob.theta_0 = theta_0;
    prob.p = p / norm;
    prob.space = space;
    prob.bound_transform = std::move(bound_transform);
    prob.theta_feas = std::move(theta_feas);
    prob.opts = opts;

    prob.p_is_basis = false;
    prob.basis_index = -1;
    for (int k = 0; k < d; ++k) {
        if (std::fabs(std::fabs(prob.p(k)) - 1.0) < 1e-12) {
            bool rest_zero = true;
            for (int j = 0; j < d; ++j)
                if (j != k && std::fabs(prob.p(j)) > 1e-12) rest_zero = false;
            if (rest_zero) {
                prob.p_is_basis = true;
                prob.basis_index = k;
                // snap to an exact basis vector
                const double sign = prob.p(k) > 0 ? 1.0 : -1.0;
                prob.p.setZero();
                prob.p(k) = sign;
                break;
            }
        }
    }
    if (!prob.p_is_basis && !prob.bound_transform)
        throw std::invalid_argument(
            "non-basis p requires a bound_transform hook for polytope sampling");
    return prob;
}

} // namespace cpi
