#include <doctest.h>

#include "cpi/lp.hpp"
#include "cpi/models/dgp8.hpp"
#include "oracles.hpp"

using namespace cpi;

namespace {

LinearSystem make_system(std::initializer_list<std::initializer_list<double>> rows,
                         std::initializer_list<double> rhs) {
    LinearSystem sys;
    const int m = static_cast<int>(rows.size());
    const int d = static_cast<int>(rows.begin()->size());
    sys.a.resize(m, d);
    sys.b.resize(m);
    int i = 0;
    for (const auto& row : rows) {
        int j = 0;
        for (double v : row) sys.a(i, j++) = v;
        ++i;
    }
    i = 0;
    for (double v : rhs) sys.b(i++) = v;
    return sys;
}

} // namespace

TEST_CASE("feasibility basics in one dimension") {
    // {lambda <= 1, -lambda <= 1, lambda <= 0, -lambda <= 0}: origin works
    CHECK(is_feasible(make_system({{1}, {-1}, {1}, {-1}}, {1, 1, 0, 0})));
    // contradictory bounds
    CHECK_FALSE(is_feasible(make_system({{1}, {-1}}, {-1, -1})));
}

TEST_CASE("phase one needs a nontrivial pivot when the origin violates") {
    // feasible only away from the origin
    const LinearSystem sys = make_system({{-1, 0}, {0, -1}, {1, 1}}, {-2, -2, 10});
    const PhaseOneResult r = phase_one(sys);
    CHECK(r.feasible);
    CHECK((sys.a * r.point - sys.b).maxCoeff() <= 1e-6);
}

TEST_CASE("verdict matches the vertex-enumeration oracle on 200 random systems") {
    RngStream rng(20240811, RngDomain::test, 0);
    int feasible_seen = 0, infeasible_seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const oracles::RandomSystem rs = oracles::random_system(rng);
        const bool expected = oracles::feasible_by_vertex_enumeration(rs.a, rs.b);
        LinearSystem sys{rs.a, rs.b};
        const bool got = is_feasible(sys);
        CAPTURE(trial);
        CHECK(got == expected);
        (expected ? feasible_seen : infeasible_seen) += 1;
    }
    // the generator must exercise both verdicts to mean anything
    CHECK(feasible_seen > 20);
    CHECK(infeasible_seen > 20);
}

TEST_CASE("scale invariance and row-drop monotonicity") {
    RngStream rng(5150, RngDomain::test, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const oracles::RandomSystem rs = oracles::random_system(rng);
        LinearSystem sys{rs.a, rs.b};
        const bool base = is_feasible(sys);

        // positive row scaling never flips the verdict
        LinearSystem scaled = sys;
        const int row = static_cast<int>(rng.uniform_index(sys.rows()));
        const double s = 0.01 + 100.0 * rng.uniform01();
        scaled.a.row(row) *= s;
        scaled.b(row) *= s;
        CHECK(is_feasible(scaled) == base);

        // dropping a row never turns feasible into infeasible
        if (sys.rows() > 1) {
            LinearSystem dropped;
            dropped.a.resize(sys.rows() - 1, sys.cols());
            dropped.b.resize(sys.rows() - 1);
            int k = 0;
            for (int i = 0; i < sys.rows(); ++i) {
                if (i == row) continue;
                dropped.a.row(k) = sys.a.row(i);
                dropped.b(k) = sys.b(i);
                ++k;
            }
            if (base) CHECK(is_feasible(dropped));
        }
    }
}

namespace {

struct AssemblyFixture {
    VectorXd theta;
    MatrixXd grads;
    std::vector<char> keep;
    GmsShift shift;
    ParameterSpace space;
    VectorXd p;
    double sqrt_n = 10.0;
    double rho = 1e4;

    AssemblyFixture(int d, int j1) {
        theta = VectorXd::Constant(d, 0.5);
        grads = MatrixXd::Zero(j1, d);
        RngStream rng(99, RngDomain::test, static_cast<std::uint64_t>(d * 100 + j1));
        for (int i = 0; i < j1; ++i)
            for (int k = 0; k < d; ++k) grads(i, k) = rng.uniform(-1.0, 1.0);
        keep.assign(j1, 1);
        shift.shift_ineq = VectorXd::Zero(j1);
        shift.deleted_ineq.assign(j1, 0);
        space.lb = VectorXd::Zero(d);
        space.ub = VectorXd::Ones(d);
        p = VectorXd::Zero(d);
        p(0) = 1.0;
    }
};

} // namespace

TEST_CASE("lambda-system row count matches the sizing formula") {
    // box-only, d = 2, J1 = 4, no drops: 4 + 2d + 2 = 10 rows
    AssemblyFixture fx(2, 4);
    const VectorXd boot_row = VectorXd::Zero(4);
    const LinearSystem sys = assemble_lambda_system(fx.theta, 1.0, boot_row, fx.grads, fx.keep,
                                                    fx.shift, fx.space, fx.p, fx.sqrt_n, fx.rho);
    CHECK(sys.rows() == 10);
    CHECK(sys.cols() == 2);
}

TEST_CASE("bound rows merge the box and the rho ball") {
    AssemblyFixture fx(3, 2);
    fx.rho = 2.0;   // binding: sqrt_n * (ub - theta) = 10 * 0.5 = 5 > rho
    const VectorXd boot_row = VectorXd::Zero(2);
    const LinearSystem sys = assemble_lambda_system(fx.theta, 0.0, boot_row, fx.grads, fx.keep,
                                                    fx.shift, fx.space, fx.p, fx.sqrt_n, fx.rho);
    // rows 2..7 are the merged bound rows, all capped at rho
    for (int r = 2; r < 8; ++r) CHECK(sys.b(r) == doctest::Approx(2.0));

    // with a huge rho at the box midpoint they reduce to sqrt_n/2
    AssemblyFixture fx2(3, 2);
    const LinearSystem sys2 = assemble_lambda_system(fx2.theta, 0.0, boot_row, fx2.grads, fx2.keep,
                                                     fx2.shift, fx2.space, fx2.p, fx2.sqrt_n,
                                                     fx2.rho);
    for (int r = 2; r < 8; ++r) CHECK(sys2.b(r) == doctest::Approx(5.0));
}

TEST_CASE("GMS-deleted rows are omitted, not set to infinity") {
    AssemblyFixture fx(2, 4);
    fx.shift.deleted_ineq[1] = 1;
    fx.keep[2] = 0;
    const VectorXd boot_row = VectorXd::Zero(4);
    const LinearSystem sys = assemble_lambda_system(fx.theta, 1.0, boot_row, fx.grads, fx.keep,
                                                    fx.shift, fx.space, fx.p, fx.sqrt_n, fx.rho);
    CHECK(sys.rows() == 2 + 4 + 2);   // two moment rows survive
    for (int i = 0; i < sys.rows(); ++i) CHECK(std::isfinite(sys.b(i)));
}

TEST_CASE("monotonicity in c: loosening the level keeps feasibility") {
    RngStream rng(321, RngDomain::test, 0);
    AssemblyFixture fx(2, 6);
    VectorXd boot_row(6);
    for (int trial = 0; trial < 40; ++trial) {
        for (int j = 0; j < 6; ++j) boot_row(j) = rng.normal();
        const double c = rng.uniform(0.0, 2.0);
        const LinearSystem lo = assemble_lambda_system(fx.theta, c, boot_row, fx.grads, fx.keep,
                                                       fx.shift, fx.space, fx.p, fx.sqrt_n, fx.rho);
        const LinearSystem hi = assemble_lambda_system(fx.theta, c + rng.uniform(0.0, 2.0),
                                                       boot_row, fx.grads, fx.keep, fx.shift,
                                                       fx.space, fx.p, fx.sqrt_n, fx.rho);
        if (is_feasible(lo)) CHECK(is_feasible(hi));
    }
}

TEST_CASE("dgp8 polytope rows appear in the assembled system") {
    const models::Dgp8Hooks hooks = models::dgp8_space_hooks();
    const int d = 5;
    VectorXd theta(d);
    theta << 0.6, 0.5, 0.2, 0.3, 0.1;
    MatrixXd grads = MatrixXd::Zero(3, d);
    grads(0, 0) = 1.0;
    grads(1, 1) = 1.0;
    grads(2, 2) = 1.0;
    std::vector<char> keep(3, 1);
    GmsShift shift;
    shift.shift_ineq = VectorXd::Zero(3);
    shift.deleted_ineq.assign(3, 0);
    VectorXd p = VectorXd::Zero(d);
    p(0) = 1.0;
    const double sqrt_n = 20.0;

    const LinearSystem sys =
        assemble_lambda_system(theta, 0.5, VectorXd::Zero(3), grads, keep, shift, hooks.space, p,
                               sqrt_n, 1e4);
    CHECK(sys.rows() == 3 + 2 * d + 2 + 13);

    // the final 13 rows are exactly the hook's lambda rows, including
    // -lambda_1 + lambda_k <= -sqrt_n (-theta_1 + theta_k) for k = 3,4,5
    const LinearSystem rows = hooks.lambda_rows(theta, sqrt_n);
    REQUIRE(rows.rows() == 13);
    CHECK((sys.a.bottomRows(13) - rows.a).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((sys.b.tail(13) - rows.b).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (int k = 0; k < 3; ++k) {
        const int r = 7 + k;   // theta_{k+3} - theta_1 <= 0 rows
        CHECK(rows.a(r, 0) == -1.0);
        CHECK(rows.a(r, 2 + k) == 1.0);
        CHECK(rows.b(r) ==
              doctest::Approx(-sqrt_n * (-theta(0) + theta(2 + k))));
    }
}

TEST_CASE("max_linear_over_space against closed forms") {
    ParameterSpace box;
    box.lb = VectorXd::Zero(3);
    box.ub = VectorXd::Ones(3);
    VectorXd q(3);
    q << 1.0, -2.0, 0.5;
    CHECK(max_linear_over_space(box, q) == doctest::Approx(1.5));

    // half-space theta_1 + theta_2 <= 1 caps e1-max at 1 with theta_2 = 0,
    // but q = (1,1,0) maxes at 1 instead of 2
    ParameterSpace poly = box;
    poly.poly_a = MatrixXd::Zero(1, 3);
    poly.poly_a(0, 0) = 1.0;
    poly.poly_a(0, 1) = 1.0;
    poly.poly_b = VectorXd::Ones(1);
    VectorXd q2(3);
    q2 << 1.0, 1.0, 0.0;
    CHECK(max_linear_over_space(poly, q2) == doctest::Approx(1.0).epsilon(1e-6));
}
