#include <doctest.h>

#include <cmath>

#include "cpi/models/box.hpp"
#include "cpi/models/dgp8.hpp"
#include "cpi/models/entry_game.hpp"
#include "cpi/optim.hpp"
#include "oracles.hpp"

using namespace cpi;
using namespace cpi::models;

namespace {

// Outcome-cell frequencies from a simulated panel: P(Y = y, X = x).
double cell_frequency(const MatrixXd& data, int y1, int y2, int x1, int x2) {
    int hits = 0;
    for (int i = 0; i < data.rows(); ++i) {
        if (static_cast<int>(data(i, 0)) == y1 && static_cast<int>(data(i, 1)) == y2 &&
            (data(i, 3) > 0) == (x1 > 0) && (data(i, 5) > 0) == (x2 > 0))
            ++hits;
    }
    return static_cast<double>(hits) / data.rows();
}

const int kSupport[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};

VectorXd random_game_theta(RngStream& rng) {
    const ParameterSpace space = entry_game_space();
    VectorXd theta(8);
    for (int k = 0; k < 8; ++k)
        theta(k) = space.lb(k) + (0.15 + 0.7 * rng.uniform01()) * (space.ub(k) - space.lb(k));
    return theta;
}

} // namespace

TEST_CASE("entry game closed form at theta = 0, x = (1,1)") {
    const auto model = entry_game_model();
    VectorXd g_ineq, g_eq;
    model->g(VectorXd::Zero(8), g_ineq, g_eq);
    // Phi(0) = 1/2 everywhere: upper-bound term -(1/2)(1/2)(1/4) = -1/16
    CHECK(g_ineq(6) == doctest::Approx(-0.0625).epsilon(1e-12));
    // doubling convention on the equality block
    for (int k = 0; k < 8; ++k) CHECK(g_eq(8 + k) == doctest::Approx(-g_eq(k)).epsilon(1e-12));
}

TEST_CASE("entry game moments match game-simulation frequencies") {
    const auto model = entry_game_model();
    RngStream rng(314, RngDomain::test, 0);
    const int n = 1000000;

    for (int trial = 0; trial < 10; ++trial) {
        const VectorXd theta = random_game_theta(rng);
        VectorXd g_ineq, g_eq;
        model->g(theta, g_ineq, g_eq);

        // upper bound attained under the always-(0,1) selection rule
        const MatrixXd up =
            simulate_entry_game(theta, n, 0.0, SelectionRule::always_01, 1000 + trial);
        // lower bound attained under the always-(1,0) rule
        const MatrixXd dn =
            simulate_entry_game(theta, n, 0.0, SelectionRule::always_10, 2000 + trial);

        for (int ii = 0; ii < 4; ++ii) {
            const int x1 = kSupport[ii][0], x2 = kSupport[ii][1];

            const double p_up = cell_frequency(up, 0, 1, x1, x2);
            const double bound_up = -g_ineq(2 * ii);
            double se = std::sqrt(std::max(p_up * (1 - p_up), 1e-9) / n);
            CAPTURE(trial);
            CAPTURE(ii);
            CHECK(std::fabs(p_up - bound_up) <= 3.0 * se + 1e-9);

            const double p_dn = cell_frequency(dn, 0, 1, x1, x2);
            const double bound_dn = g_ineq(2 * ii + 1);
            se = std::sqrt(std::max(p_dn * (1 - p_dn), 1e-9) / n);
            CHECK(std::fabs(p_dn - bound_dn) <= 3.0 * se + 1e-9);

            // point-identified outcomes hold under any selection rule
            const double p00 = cell_frequency(up, 0, 0, x1, x2);
            se = std::sqrt(std::max(p00 * (1 - p00), 1e-9) / n);
            CHECK(std::fabs(p00 - (-g_eq(2 * ii))) <= 3.0 * se + 1e-9);

            const double p11 = cell_frequency(dn, 1, 1, x1, x2);
            se = std::sqrt(std::max(p11 * (1 - p11), 1e-9) / n);
            CHECK(std::fabs(p11 - (-g_eq(2 * ii + 1))) <= 3.0 * se + 1e-9);
        }
    }
}

TEST_CASE("no strategic interaction decouples the entry probabilities") {
    VectorXd theta = entry_game_theta_true();
    theta(4) = theta(5) = theta(6) = theta(7) = 0.0;   // delta = 0
    const int n = 1000000;
    const MatrixXd data = simulate_entry_game(theta, n, 0.0, SelectionRule::uniform, 99);
    for (int x1 : {-1, 1}) {
        const double a1 = theta(0) + x1 * theta(1);
        double hits = 0, total = 0;
        for (int i = 0; i < n; ++i) {
            if ((data(i, 3) > 0) != (x1 > 0)) continue;
            total += 1;
            hits += data(i, 0);
        }
        const double p = hits / total;
        const double expect = 1.0 - normal_cdf(-a1);
        const double se = std::sqrt(expect * (1 - expect) / total);
        CHECK(std::fabs(p - expect) <= 3.0 * se);
    }
}

TEST_CASE("simulator determinism and correlated shocks") {
    const VectorXd theta = entry_game_theta_true();
    const MatrixXd a = simulate_entry_game(theta, 500, 0.0, SelectionRule::uniform, 7);
    const MatrixXd b = simulate_entry_game(theta, 500, 0.0, SelectionRule::uniform, 7);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    CHECK_NOTHROW(simulate_entry_game(theta, 100, 0.5, SelectionRule::uniform, 8));
    CHECK_THROWS_AS(simulate_entry_game(theta, 100, 1.0, SelectionRule::uniform, 8),
                    std::invalid_argument);
}

TEST_CASE("paired labels and counts") {
    const auto model = entry_game_model();
    CHECK(model->counts().j1 == 8);
    CHECK(model->counts().j2 == 8);
    CHECK(model->counts().j3 == 4);
    const MatrixXd data = simulate_entry_game(entry_game_theta_true(), 400, 0.0,
                                              SelectionRule::uniform, 5);
    const FhatResult f = model->f_hat(data);
    for (int ii = 0; ii < 4; ++ii) {
        CHECK(f.paired[2 * ii] == ii + 1);
        CHECK(f.paired[2 * ii + 1] == ii + 1);
    }
}

TEST_CASE("axis box model: exact sample moments give the stated interval") {
    // symmetric two-point data around mu makes the column means exactly mu
    const Eigen::Vector2d mu(0.3, -0.2);
    MatrixXd data(4, 2);
    data << mu(0) + 1, mu(1) - 1, mu(0) - 1, mu(1) + 1, mu(0) + 1, mu(1) + 1, mu(0) - 1,
        mu(1) - 1;
    const auto model = box_model(1.0);
    Options opts;
    const EmpiricalMoments em = compute_empirical(data, *model, opts);
    // moments f + g <= 0 read: theta_1 <= mu_1 + 1, theta_1 >= mu_1 - 1, ...
    CHECK(em.f_ineq(0) == doctest::Approx(-mu(0) - 1.0));
    CHECK(em.f_ineq(1) == doctest::Approx(mu(0) - 1.0));
    CHECK(em.f_ineq(2) == doctest::Approx(-mu(1) - 1.0));
    CHECK(em.f_ineq(3) == doctest::Approx(mu(1) - 1.0));

    const auto proj = model->identified_projection(mu);
    CHECK(proj.first == doctest::Approx(mu(0) - 1.0));
    CHECK(proj.second == doctest::Approx(mu(0) + 1.0));
}

TEST_CASE("rotated box projection in closed form") {
    const double h = 0.75;
    const auto model = rotated_box_model(M_PI / 4, h);
    const Eigen::Vector2d mu(0.0, 0.0);
    const auto proj = model->identified_projection(mu);
    // projection halfwidth of a rotated square: h (|cos| + |sin|) = h sqrt(2)
    CHECK(proj.second - proj.first == doctest::Approx(2.0 * h * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(proj.first == doctest::Approx(-h * std::sqrt(2.0)).epsilon(1e-12));

    // linear moments have a constant gradient
    MatrixXd dg1, dge1, dg2, dge2;
    model->g_gradient(Eigen::Vector2d(0.1, 0.2), dg1, dge1);
    model->g_gradient(Eigen::Vector2d(-1.0, 0.9), dg2, dge2);
    CHECK((dg1 - dg2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dgp8 hooks reproduce the documented bound transform") {
    const Dgp8Hooks hooks = dgp8_space_hooks();
    CHECK(hooks.space.poly_rows() == 13);
    CHECK_NOTHROW(validate_space(hooks.space));

    VectorXd lb_in = VectorXd::Zero(5);
    VectorXd ub_in(5);
    ub_in << 1e-4, 1.0, 1.0, 1.0, 1.0;
    const auto [lb_out, ub_out] = hooks.bound_transform(lb_in, ub_in);
    CHECK((lb_out - lb_in).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ub_out(0) == 1e-4);
    CHECK(ub_out(1) == 1.0);
    CHECK(ub_out(2) == 1e-4);
    CHECK(ub_out(3) == 1e-4);
    CHECK(ub_out(4) == 1e-4);

    // every draw-and-discard sample satisfies all 13 rows
    RngStream rng(12, RngDomain::test, 0);
    const DrawResult draws = draw_and_discard(hooks.space, hooks.bound_transform, 300, rng);
    for (int i = 0; i < draws.points.rows(); ++i) {
        const VectorXd theta = draws.points.row(i).transpose();
        CHECK((hooks.space.poly_b - hooks.space.poly_a * theta).minCoeff() >= -1e-12);
    }

    // lambda-row hook: 13 rows of A lambda <= sqrt_n (b - A theta)
    VectorXd theta(5);
    theta << 0.4, 0.6, 0.1, 0.2, 0.3;
    const LinearSystem rows = hooks.lambda_rows(theta, 30.0);
    CHECK(rows.rows() == 13);
    CHECK(rows.b(0) == doctest::Approx(30.0 * (1.0 - 0.4)));
    CHECK(rows.b(2) == doctest::Approx(30.0 * 0.4));   // -lambda_1 <= sqrt_n theta_1
}

TEST_CASE("separability: f is theta-free and g is data-free") {
    const auto model = entry_game_model();
    const MatrixXd d1 = simulate_entry_game(entry_game_theta_true(), 300, 0.0,
                                            SelectionRule::uniform, 1);
    const MatrixXd d2 = simulate_entry_game(entry_game_theta_true(), 300, 0.0,
                                            SelectionRule::uniform, 2);
    // g depends only on theta
    VectorXd gi1, ge1, gi2, ge2;
    model->g(entry_game_theta_true(), gi1, ge1);
    model->g(entry_game_theta_true(), gi2, ge2);
    CHECK((gi1 - gi2).cwiseAbs().maxCoeff() == 0.0);
    // f depends only on data (same data, same output)
    const FhatResult fa = model->f_hat(d1);
    const FhatResult fb = model->f_hat(d1);
    CHECK((fa.f_ineq - fb.f_ineq).cwiseAbs().maxCoeff() == 0.0);
    CHECK((fa.f_eq - fb.f_eq).cwiseAbs().maxCoeff() == 0.0);
    const FhatResult fc = model->f_hat(d2);
    CHECK((fa.f_ineq - fc.f_ineq).cwiseAbs().maxCoeff() > 0.0);   // different sample
}
