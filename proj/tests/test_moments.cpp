#include <doctest.h>

#include <numeric>

#include "cpi/moments.hpp"
#include "cpi/models/box.hpp"
#include "cpi/models/entry_game.hpp"

using namespace cpi;

namespace {

// n rows split between outcome (0,1) and (0,0), all at x = (1,1); frequency
// of the (0,1) cell is exactly hits/n.
MatrixXd crafted_entry_data(int n, int hits) {
    MatrixXd data(n, 6);
    for (int i = 0; i < n; ++i) {
        const bool is01 = i < hits;
        data(i, 0) = 0.0;
        data(i, 1) = is01 ? 1.0 : 0.0;
        data(i, 2) = 1.0;
        data(i, 3) = 1.0;
        data(i, 4) = 1.0;
        data(i, 5) = 1.0;
    }
    return data;
}

} // namespace

TEST_CASE("bernoulli sigma matches the closed form and the direct sample sd") {
    const auto model = models::entry_game_model();
    const MatrixXd data = crafted_entry_data(16, 4);   // fhat = 0.25 at cell (1,1)
    Options opts;
    const EmpiricalMoments em = compute_empirical(data, *model, opts);

    const int j = 2 * 3;   // support point (1,1) is index 3, upper-bound row
    CHECK(em.f_ineq(j) == doctest::Approx(0.25));
    CHECK(em.sigma_ineq(j) == doctest::Approx(0.43301270189221930).epsilon(1e-12));

    // direct sample standard deviation of the indicator column
    double mean = 0.0;
    for (int i = 0; i < 16; ++i) mean += (data(i, 1) > 0.5) ? 1.0 : 0.0;
    mean /= 16.0;
    double var = 0.0;
    for (int i = 0; i < 16; ++i) {
        const double v = ((data(i, 1) > 0.5) ? 1.0 : 0.0) - mean;
        var += v * v;
    }
    var /= 16.0;
    CHECK(em.sigma_ineq(j) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("keep flags drop frequencies near the support boundary") {
    const auto model = models::entry_game_model();   // threshold 1e-4
    Options opts;

    // fhat = 1e-5 < 1e-4 at the (0,1)@(1,1) rows
    const EmpiricalMoments tiny = compute_empirical(crafted_entry_data(100000, 1), *model, opts);
    CHECK(tiny.keep_ineq[6] == 0);
    CHECK(tiny.keep_ineq[7] == 0);
    CHECK(tiny.sigma_ineq(6) == 1.0);   // inert placeholder

    // fhat = 0.5 is far from both boundaries
    const EmpiricalMoments half = compute_empirical(crafted_entry_data(4, 2), *model, opts);
    CHECK(half.keep_ineq[6] == 1);
    CHECK(half.keep_ineq[7] == 1);

    // idempotence: the rule applied to the kept values drops nothing new
    for (int j = 0; j < 8; ++j) {
        if (!half.keep_ineq[j]) continue;
        const double a = std::fabs(half.f_ineq(j));
        CHECK(a >= opts.f_keep_threshold);
        CHECK(a <= 1.0 - opts.f_keep_threshold);
    }
}

TEST_CASE("identity resample recenters to exactly zero") {
    const auto model = models::entry_game_model();
    const MatrixXd data = models::simulate_entry_game(models::entry_game_theta_true(), 300, 0.0,
                                                      models::SelectionRule::uniform, 11);
    Options opts;
    const EmpiricalMoments em = compute_empirical(data, *model, opts);
    std::vector<int> identity(300);
    std::iota(identity.begin(), identity.end(), 0);
    const VectorXd row = bootstrap_row(data, *model, em, identity);
    CHECK(row.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("bootstrap ensemble determinism and antisymmetry") {
    const auto model = models::entry_game_model();
    const MatrixXd data = models::simulate_entry_game(models::entry_game_theta_true(), 400, 0.0,
                                                      models::SelectionRule::uniform, 5);
    Options opts;
    opts.b = 301;
    const EmpiricalMoments em = compute_empirical(data, *model, opts);

    const BootstrapEnsemble b1 = bootstrap_ensemble(data, *model, em, opts, 77, 1);
    const BootstrapEnsemble b2 = bootstrap_ensemble(data, *model, em, opts, 77, 3);
    CHECK((b1.g_ineq - b2.g_ineq).cwiseAbs().maxCoeff() == 0.0);   // bit-for-bit
    CHECK((b1.g_eq - b2.g_eq).cwiseAbs().maxCoeff() == 0.0);

    const BootstrapEnsemble b3 = bootstrap_ensemble(data, *model, em, opts, 78, 1);
    CHECK((b1.g_ineq - b3.g_ineq).cwiseAbs().maxCoeff() > 0.0);

    for (int b = 0; b < opts.b; ++b)
        for (int k = 0; k < 8; ++k)
            CHECK(b1.g_eq(b, 8 + k) == doctest::Approx(-b1.g_eq(b, k)));

    // dropped moments hold zeros
    for (int j = 0; j < 8; ++j)
        if (!em.keep_ineq[j]) CHECK(b1.g_ineq.col(j).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bootstrap mean over b vanishes at the law-of-large-numbers rate") {
    const auto model = models::box_model();
    const MatrixXd data = models::simulate_box_data({0.0, 0.0}, 200, 9);
    Options opts;
    opts.b = 2000;
    const EmpiricalMoments em = compute_empirical(data, *model, opts);
    const BootstrapEnsemble boot = bootstrap_ensemble(data, *model, em, opts, 1234, 2);
    for (int j = 0; j < 4; ++j) {
        const double mean = boot.g_ineq.col(j).mean();
        const double sd = std::sqrt((boot.g_ineq.col(j).array() - mean).square().sum() / opts.b);
        CHECK(std::fabs(mean) <= 3.0 * sd / std::sqrt(static_cast<double>(opts.b)));
    }
}

TEST_CASE("gms shift: hard threshold and kappa") {
    const auto model = models::box_model();
    const MatrixXd data = models::simulate_box_data({0.0, 0.0}, 4000, 21);
    Options opts;
    const EmpiricalMoments em = compute_empirical(data, *model, opts);
    CHECK(opts.kappa_value(4000) == doctest::Approx(2.8799391729864760).epsilon(1e-12));

    // xi = -0.5 -> shift 0; xi = -2 -> deleted. Invert the xi formula to pick
    // theta hitting those values on moment 0 (g_0 = theta_1).
    const double kappa = opts.kappa_value(4000);
    const double root_n = std::sqrt(4000.0);
    auto theta_for_xi = [&](double xi) {
        VectorXd theta(2);
        theta << (xi * kappa * em.sigma_ineq(0) / root_n) - em.f_ineq(0), 0.0;
        return theta;
    };
    const GmsShift s1 = gms_shift(theta_for_xi(-0.5), em, *model, opts);
    CHECK(s1.deleted_ineq[0] == 0);
    CHECK(s1.shift_ineq(0) == 0.0);

    const GmsShift s2 = gms_shift(theta_for_xi(-2.0), em, *model, opts);
    CHECK(s2.deleted_ineq[0] == 1);

    // boundary of the hard threshold sits at exactly -1
    const GmsShift s3 = gms_shift(theta_for_xi(-1.0), em, *model, opts);
    CHECK(s3.deleted_ineq[0] == 0);

    // monotone: as xi increases the shift never moves from 0 to deleted
    bool deleted_prev = true;
    for (double xi = -3.0; xi <= 1.0; xi += 0.1) {
        const GmsShift s = gms_shift(theta_for_xi(xi), em, *model, opts);
        const bool deleted = s.deleted_ineq[0] != 0;
        if (!deleted_prev) CHECK_FALSE(deleted);
        deleted_prev = deleted;
    }
}

TEST_CASE("compute_empirical error paths") {
    const auto model = models::box_model();
    Options opts;
    MatrixXd one_row(1, 2);
    one_row << 0.0, 0.0;
    CHECK_THROWS_AS(compute_empirical(one_row, *model, opts), std::invalid_argument);

    // constant column gives sigma ~ 0 on a kept moment
    MatrixXd constant(10, 2);
    constant.setZero();
    CHECK_THROWS_AS(compute_empirical(constant, *model, opts), std::runtime_error);
}
