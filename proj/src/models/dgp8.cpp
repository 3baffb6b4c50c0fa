#include "cpi/models/dgp8.hpp"

#include <cmath>

#include "cpi/rng.hpp"

namespace cpi::models {

Dgp8Hooks dgp8_space_hooks() {
    Dgp8Hooks hooks;
    ParameterSpace& space = hooks.space;
    space.lb = VectorXd::Zero(5);
    space.ub = VectorXd::Ones(5);

    // 13 rows: theta_k <= 1 (k = 1,2); -theta_k <= 0 (k = 1..5);
    // theta_k - theta_1 <= 0 and theta_k - theta_2 <= 0 (k = 3,4,5).
    space.poly_a = MatrixXd::Zero(13, 5);
    space.poly_b = VectorXd::Zero(13);
    int r = 0;
    for (int k = 0; k < 2; ++k, ++r) {
        space.poly_a(r, k) = 1.0;
        space.poly_b(r) = 1.0;
    }
    for (int k = 0; k < 5; ++k, ++r) space.poly_a(r, k) = -1.0;
    for (int k = 2; k < 5; ++k, ++r) {
        space.poly_a(r, k) = 1.0;
        space.poly_a(r, 0) = -1.0;
    }
    for (int k = 2; k < 5; ++k, ++r) {
        space.poly_a(r, k) = 1.0;
        space.poly_a(r, 1) = -1.0;
    }

    hooks.bound_transform = [](const VectorXd& lb_in,
                               const VectorXd& ub_in) -> std::pair<VectorXd, VectorXd> {
        VectorXd ub_out = ub_in;
        const double cap = std::min(ub_in(0), ub_in(1));
        for (int k = 2; k < 5; ++k) ub_out(k) = std::min(cap, ub_in(k));
        return {lb_in, ub_out};
    };

    hooks.lambda_rows = [space](const VectorXd& theta, double sqrt_n) {
        LinearSystem sys;
        sys.a = space.poly_a;
        sys.b = sqrt_n * (space.poly_b - space.poly_a * theta);
        return sys;
    };
    return hooks;
}

FhatResult Dgp8LinearModel::f_hat(const MatrixXd& data) const {
    FhatResult out;
    out.f_ineq.resize(4);
    const double m1 = data.col(0).mean();
    const double m2 = data.col(1).mean();
    out.f_ineq << -m1 - halfwidth_, m1 - halfwidth_, -m2 - halfwidth_, m2 - halfwidth_;
    out.f_eq.resize(0);
    out.keep_ineq.assign(4, 1);
    out.keep_eq.clear();
    out.paired.assign(4, 0);
    return out;
}

void Dgp8LinearModel::g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const {
    g_ineq.resize(4);
    g_ineq << theta(0), -theta(0), theta(1), -theta(1);
    g_eq.resize(0);
}

void Dgp8LinearModel::g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const {
    (void)theta;
    dg_ineq.setZero(4, 5);
    dg_ineq(0, 0) = 1.0;
    dg_ineq(1, 0) = -1.0;
    dg_ineq(2, 1) = 1.0;
    dg_ineq(3, 1) = -1.0;
    dg_eq.resize(0, 5);
}

void Dgp8LinearModel::sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
                                VectorXd& sigma_ineq, VectorXd& sigma_eq) const {
    (void)f_ineq;
    (void)f_eq;
    const int n = static_cast<int>(data.rows());
    sigma_ineq.resize(4);
    for (int k = 0; k < 2; ++k) {
        const double mean = data.col(k).mean();
        const double var = (data.col(k).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        sigma_ineq(2 * k) = sd;
        sigma_ineq(2 * k + 1) = sd;
    }
    sigma_eq.resize(0);
}

std::shared_ptr<const Dgp8LinearModel> dgp8_linear_model(double halfwidth) {
    return std::make_shared<Dgp8LinearModel>(halfwidth);
}

MatrixXd simulate_dgp8_data(const Eigen::Vector2d& mu, int n, std::uint64_t seed) {
    RngStream rng(seed, RngDomain::sim_markets, 0);
    MatrixXd data(n, 2);
    for (int i = 0; i < n; ++i) {
        data(i, 0) = mu(0) + rng.normal();
        data(i, 1) = mu(1) + rng.normal();
    }
    return data;
}

} // namespace cpi::models
