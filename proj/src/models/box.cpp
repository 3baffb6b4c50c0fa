#include "cpi/models/box.hpp"

#include <cmath>

namespace cpi::models {

BoxModel::BoxModel(double angle_rad, double halfwidth) : halfwidth_(halfwidth) {
    rot_ << std::cos(angle_rad), -std::sin(angle_rad), std::sin(angle_rad), std::cos(angle_rad);
}

FhatResult BoxModel::f_hat(const MatrixXd& data) const {
    // Moments: (R theta)_k - w_k - h <= 0 and w_k - h - (R theta)_k <= 0,
    // k = 1, 2, stacked as rows (1,2) for k=1 and (3,4) for k=2.
    FhatResult out;
    out.f_ineq.resize(4);
    const double m1 = data.col(0).mean();
    const double m2 = data.col(1).mean();
    out.f_ineq << -m1 - halfwidth_, m1 - halfwidth_, -m2 - halfwidth_, m2 - halfwidth_;
    out.f_eq.resize(0);
    out.keep_ineq.assign(4, 1);   // unbounded support, never dropped
    out.keep_eq.clear();
    out.paired.assign(4, 0);
    return out;
}

void BoxModel::g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const {
    const Eigen::Vector2d v = rot_ * theta.head<2>();
    g_ineq.resize(4);
    g_ineq << v(0), -v(0), v(1), -v(1);
    g_eq.resize(0);
}

void BoxModel::g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const {
    (void)theta;
    dg_ineq.resize(4, 2);
    dg_ineq.row(0) = rot_.row(0);
    dg_ineq.row(1) = -rot_.row(0);
    dg_ineq.row(2) = rot_.row(1);
    dg_ineq.row(3) = -rot_.row(1);
    dg_eq.resize(0, 2);
}

void BoxModel::sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
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

std::pair<double, double> BoxModel::identified_projection(const Eigen::Vector2d& mu) const {
    // theta = R' v over the rectangle v in prod [mu_k -+ h]; theta_1 range
    // from the rectangle corners.
    double lo = kInf, hi = -kInf;
    for (int s1 : {-1, 1}) {
        for (int s2 : {-1, 1}) {
            const Eigen::Vector2d v(mu(0) + s1 * halfwidth_, mu(1) + s2 * halfwidth_);
            const double t1 = (rot_.transpose() * v)(0);
            lo = std::min(lo, t1);
            hi = std::max(hi, t1);
        }
    }
    return {lo, hi};
}

std::shared_ptr<const BoxModel> box_model(double halfwidth) {
    return std::make_shared<BoxModel>(0.0, halfwidth);
}

std::shared_ptr<const BoxModel> rotated_box_model(double angle_rad, double halfwidth) {
    return std::make_shared<BoxModel>(angle_rad, halfwidth);
}

MatrixXd simulate_box_data(const Eigen::Vector2d& mu, int n, std::uint64_t seed) {
    RngStream rng(seed, RngDomain::sim_markets, 0);
    MatrixXd data(n, 2);
    for (int i = 0; i < n; ++i) {
        data(i, 0) = mu(0) + rng.normal();
        data(i, 1) = mu(1) + rng.normal();
    }
    return data;
}

} // namespace cpi::models
