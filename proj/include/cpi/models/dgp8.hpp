#pragma once

#include <functional>
#include <memory>

#include "cpi/lp.hpp"
#include "cpi/model.hpp"

namespace cpi::models {

/// Polytope parameter space {theta in R^5 : theta_1, theta_2 in [0,1],
/// theta_k in [0, min(theta_1, theta_2)], k = 3,4,5} written as 13 rows,
/// its enclosing-box transform for draw-and-discard sampling, and the
/// localized lambda-constraint rows used by the bootstrap LPs.
struct Dgp8Hooks {
    ParameterSpace space;
    BoundTransform bound_transform;
    std::function<LinearSystem(const VectorXd& theta, double sqrt_n)> lambda_rows;
};

Dgp8Hooks dgp8_space_hooks();

/// Linear-moment stand-in on the 5-d polytope space: the first two
/// coordinates are bounded within +-halfwidth of the data column means
/// (J1 = 4, J2 = 0). Exercises the polytope machinery end to end.
class Dgp8LinearModel : public MomentModel {
public:
    explicit Dgp8LinearModel(double halfwidth = 0.25) : halfwidth_(halfwidth) {}

    MomentCounts counts() const override { return {4, 0, 0}; }
    int data_cols() const override { return 2; }

    FhatResult f_hat(const MatrixXd& data) const override;
    void g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const override;
    void g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const override;
    void sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
                   VectorXd& sigma_ineq, VectorXd& sigma_eq) const override;

private:
    double halfwidth_;
};

std::shared_ptr<const Dgp8LinearModel> dgp8_linear_model(double halfwidth = 0.25);

/// Two data columns centered at mu with unit normal noise.
MatrixXd simulate_dgp8_data(const Eigen::Vector2d& mu, int n, std::uint64_t seed);

} // namespace cpi::models
