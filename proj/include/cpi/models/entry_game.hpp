#pragma once

#include <memory>

#include "cpi/model.hpp"
#include "cpi/rng.hpp"

namespace cpi::models {

/// Two-player entry game with independent normal shocks (r = 0 closed
/// forms). theta = (beta1, beta2, delta1, delta2), each (constant, slope),
/// d = 8. Covariates x_k = (1, xk) with xk in {-1, +1}, four support points
/// with probability 1/4 each. J1 = 8 paired inequalities bound the (0,1)
/// outcome probability per support point; J2 = 8 equalities pin the
/// point-identified (0,0) and (1,1) outcomes.
class EntryGameModel : public MomentModel {
public:
    MomentCounts counts() const override { return {8, 8, 4}; }
    int data_cols() const override { return 6; }

    FhatResult f_hat(const MatrixXd& data) const override;
    void g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const override;
    void g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const override;
    void sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
                   VectorXd& sigma_ineq, VectorXd& sigma_eq) const override;

    double f_keep_threshold = 1e-4;
};

std::shared_ptr<EntryGameModel> entry_game_model(double f_keep_threshold = 1e-4);

/// Canonical box for the entry game; the delta bounds keep x'delta <= 0 so
/// the competition sign convention holds across the covariate support.
ParameterSpace entry_game_space();

/// Interior parameter used by the simulation defaults.
VectorXd entry_game_theta_true();

enum class SelectionRule {
    uniform,    // 50/50 between (0,1) and (1,0) in the multiplicity region
    always_01,  // always pick (0,1); attains the upper bound
    always_10,  // always pick (1,0); attains the lower bound
};

/// Simulated markets: columns (y1, y2, 1, x1, 1, x2). Shocks are bivariate
/// normal with correlation r; outcomes are pure-strategy Nash equilibria with
/// selection_rule applied in the multiplicity region.
MatrixXd simulate_entry_game(const VectorXd& theta_true, int n, double r,
                             SelectionRule selection_rule, std::uint64_t seed);

} // namespace cpi::models
