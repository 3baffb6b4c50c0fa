#pragma once

#include <memory>

#include "cpi/model.hpp"
#include "cpi/rng.hpp"

namespace cpi::models {

/// Two-dimensional linear-moment model whose identified set is an explicit
/// rectangle: for each rotated coordinate v_k = (R theta)_k the moments bound
/// v_k within +-halfwidth of the sample mean of data column k. With angle 0
/// this is the axis-aligned box; J1 = 4, J2 = 0, moments have unbounded
/// support so keep flags are always 1.
class BoxModel : public MomentModel {
public:
    explicit BoxModel(double angle_rad = 0.0, double halfwidth = 1.0);

    MomentCounts counts() const override { return {4, 0, 0}; }
    int data_cols() const override { return 2; }

    FhatResult f_hat(const MatrixXd& data) const override;
    void g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const override;
    void g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const override;
    void sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
                   VectorXd& sigma_ineq, VectorXd& sigma_eq) const override;

    /// Population identified set in the rotated frame: center (R theta) must
    /// lie in prod [mu_k - halfwidth, mu_k + halfwidth].
    double halfwidth() const { return halfwidth_; }
    const Eigen::Matrix2d& rotation() const { return rot_; }

    /// Projection of the population identified set onto e_1 for rotated-frame
    /// center mu: interval of theta_1 = (R' v)_1 over the rectangle.
    std::pair<double, double> identified_projection(const Eigen::Vector2d& mu) const;

private:
    Eigen::Matrix2d rot_;   // v = R theta
    double halfwidth_;
};

std::shared_ptr<const BoxModel> box_model(double halfwidth = 1.0);
std::shared_ptr<const BoxModel> rotated_box_model(double angle_rad, double halfwidth = 1.0);

/// Data: two columns observed in the rotated frame, w_k = mu_k + noise.
MatrixXd simulate_box_data(const Eigen::Vector2d& mu, int n, std::uint64_t seed);

} // namespace cpi::models
