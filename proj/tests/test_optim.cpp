#include <doctest.h>

#include <cmath>

#include "cpi/optim.hpp"
#include "cpi/models/dgp8.hpp"
#include "oracles.hpp"

using namespace cpi;

namespace {

NlpProblem unconstrained_1d(double target) {
    NlpProblem prob;
    prob.lb = VectorXd::Zero(1);
    prob.ub = VectorXd::Ones(1);
    prob.objective = [target](const VectorXd& x, VectorXd* grad) {
        if (grad) {
            grad->resize(1);
            (*grad)(0) = 2.0 * (x(0) - target);
        }
        return (x(0) - target) * (x(0) - target);
    };
    return prob;
}

// Active-set enumeration oracle for convex QPs min 0.5 x'Qx + c'x, Ax <= b.
double qp_oracle(const MatrixXd& q, const VectorXd& c, const MatrixXd& a, const VectorXd& b) {
    const int d = static_cast<int>(q.rows());
    const int m = static_cast<int>(a.rows());
    double best = kInf;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> active;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) active.push_back(i);
        const int k = static_cast<int>(active.size());
        if (k > d) continue;
        MatrixXd kkt(d + k, d + k);
        kkt.setZero();
        kkt.topLeftCorner(d, d) = q;
        VectorXd rhs(d + k);
        rhs.head(d) = -c;
        for (int i = 0; i < k; ++i) {
            kkt.block(d + i, 0, 1, d) = a.row(active[i]);
            kkt.block(0, d + i, d, 1) = a.row(active[i]).transpose();
            rhs(d + i) = b(active[i]);
        }
        Eigen::FullPivLU<MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const VectorXd sol = lu.solve(rhs);
        const VectorXd x = sol.head(d);
        const VectorXd mu = sol.tail(k);
        if (mu.size() > 0 && mu.minCoeff() < -1e-9) continue;
        if (m > 0 && (a * x - b).maxCoeff() > 1e-9) continue;
        best = std::min(best, 0.5 * x.dot(q * x) + c.dot(x));
    }
    return best;
}

} // namespace

TEST_CASE("unconstrained quadratic from a far start") {
    const LocalSolution sol = solve_local(unconstrained_1d(0.3), VectorXd::Constant(1, 0.9));
    CHECK(sol.x(0) == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(sol.converged);
}

TEST_CASE("active linear constraint") {
    NlpProblem prob;
    prob.lb = VectorXd::Zero(1);
    prob.ub = VectorXd::Ones(1);
    prob.objective = [](const VectorXd& x, VectorXd* grad) {
        if (grad) {
            grad->resize(1);
            (*grad)(0) = -1.0;
        }
        return -x(0);
    };
    prob.lin_a = MatrixXd::Ones(1, 1);
    prob.lin_b = VectorXd::Constant(1, 0.7);
    const LocalSolution sol = solve_local(prob, VectorXd::Constant(1, 0.1));
    CHECK(sol.x(0) == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(sol.max_constraint_violation <= kNlpFeasTol);
}

TEST_CASE("random convex QPs match the active-set oracle") {
    RngStream rng(2024, RngDomain::test, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const int d = 1 + static_cast<int>(rng.uniform_index(4));
        const int m = 1 + static_cast<int>(rng.uniform_index(5));
        MatrixXd mroot(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) mroot(i, j) = rng.uniform(-1.0, 1.0);
        const MatrixXd q = mroot.transpose() * mroot + 0.5 * MatrixXd::Identity(d, d);
        VectorXd c(d);
        for (int i = 0; i < d; ++i) c(i) = rng.uniform(-1.0, 1.0);
        MatrixXd a(m, d);
        VectorXd b(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
            b(i) = rng.uniform(0.2, 1.5);   // origin strictly feasible
        }

        NlpProblem prob;
        prob.lb = VectorXd::Constant(d, -50.0);
        prob.ub = VectorXd::Constant(d, 50.0);
        prob.objective = [&q, &c](const VectorXd& x, VectorXd* grad) {
            if (grad) *grad = q * x + c;
            return 0.5 * x.dot(q * x) + c.dot(x);
        };
        prob.lin_a = a;
        prob.lin_b = b;

        MatrixXd starts(3, d);
        starts.row(0).setZero();
        for (int j = 0; j < d; ++j) starts(1, j) = rng.uniform(-1.0, 1.0);
        for (int j = 0; j < d; ++j) starts(2, j) = rng.uniform(-1.0, 1.0);
        const MultistartResult ms = multistart(prob, starts, 2);
        REQUIRE(ms.found);

        const double expected = qp_oracle(q, c, a, b);
        CAPTURE(trial);
        CHECK(ms.best.objective == doctest::Approx(expected).epsilon(1e-5));
    }
}

TEST_CASE("multistart picks the global basin of a bimodal objective") {
    // double well with a tilt: global minimum in the left basin
    NlpProblem prob;
    prob.lb = VectorXd::Constant(1, -2.0);
    prob.ub = VectorXd::Constant(1, 2.0);
    prob.objective = [](const VectorXd& x, VectorXd* grad) {
        const double t = x(0);
        const double f = (t * t - 1.0) * (t * t - 1.0) + 0.3 * t;
        if (grad) {
            grad->resize(1);
            (*grad)(0) = 4.0 * t * (t * t - 1.0) + 0.3;
        }
        return f;
    };
    MatrixXd starts(2, 1);
    starts << -1.5, 1.5;   // one start per basin
    const MultistartResult ms = multistart(prob, starts, 1);
    REQUIRE(ms.found);

    // grid-scan oracle
    double best = kInf, best_x = 0.0;
    for (int i = 0; i <= 400000; ++i) {
        const double t = -2.0 + 4.0 * i / 400000.0;
        const double f = (t * t - 1.0) * (t * t - 1.0) + 0.3 * t;
        if (f < best) {
            best = f;
            best_x = t;
        }
    }
    CHECK(ms.best.x(0) == doctest::Approx(best_x).epsilon(1e-4));
    CHECK(ms.best.objective == doctest::Approx(best).epsilon(1e-6));

    // single-start multistart equals solve_local
    const MultistartResult single = multistart(prob, starts.topRows(1), 1);
    const LocalSolution direct = solve_local(prob, starts.row(0).transpose());
    CHECK(single.best.x(0) == doctest::Approx(direct.x(0)).epsilon(1e-12));
}

TEST_CASE("all starts infeasible yields no local solution") {
    NlpProblem prob;
    prob.lb = VectorXd::Constant(1, -2.0);
    prob.ub = VectorXd::Constant(1, 2.0);
    prob.objective = [](const VectorXd& x, VectorXd* grad) {
        if (grad) grad->setZero(1);
        return x(0) * 0.0;
    };
    prob.n_ineq = 2;
    prob.constraints = [](const VectorXd& x, VectorXd& vals, MatrixXd* jac) {
        vals.resize(2);
        vals(0) = x(0) + 1.0;    // x <= -1
        vals(1) = 1.0 - x(0);    // x >= 1
        if (jac) {
            jac->resize(2, 1);
            (*jac)(0, 0) = 1.0;
            (*jac)(1, 0) = -1.0;
        }
    };
    MatrixXd starts(3, 1);
    starts << -1.0, 0.0, 1.0;
    const MultistartResult ms = multistart(prob, starts, 1);
    CHECK_FALSE(ms.found);
}

TEST_CASE("uniform box sampler: degenerate box, mean, determinism") {
    VectorXd lb(2), ub(2);
    lb << 0.25, 0.5;
    ub = lb;
    RngStream rng(1, RngDomain::test, 0);
    const MatrixXd deg = draw_uniform_box(lb, ub, 5, rng);
    for (int i = 0; i < 5; ++i) {
        CHECK(deg(i, 0) == 0.25);
        CHECK(deg(i, 1) == 0.5);
    }

    ub << 1.0, 1.0;
    lb.setZero();
    RngStream rng2(2, RngDomain::test, 0);
    const MatrixXd draws = draw_uniform_box(lb, ub, 10000, rng2);
    CHECK(draws.col(0).mean() == doctest::Approx(0.5).epsilon(0.04));
    CHECK(draws.col(1).mean() == doctest::Approx(0.5).epsilon(0.04));

    RngStream rng3(2, RngDomain::test, 0);
    const MatrixXd again = draw_uniform_box(lb, ub, 10000, rng3);
    CHECK((draws - again).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("draw-and-discard on the dgp8 polytope") {
    const models::Dgp8Hooks hooks = models::dgp8_space_hooks();
    RngStream rng(3, RngDomain::test, 0);
    const DrawResult res = draw_and_discard(hooks.space, hooks.bound_transform, 500, rng);
    CHECK_FALSE(res.underfilled);
    REQUIRE(res.points.rows() == 500);
    for (int i = 0; i < res.points.rows(); ++i) {
        const VectorXd theta = res.points.row(i).transpose();
        const VectorXd slack = hooks.space.poly_b - hooks.space.poly_a * theta;
        CHECK(slack.minCoeff() >= -1e-12);
        // theta_k <= min(theta_1, theta_2) for k = 3,4,5
        for (int k = 2; k < 5; ++k) CHECK(theta(k) <= std::min(theta(0), theta(1)) + 1e-12);
    }
}

TEST_CASE("draw-and-discard with identity transform equals plain box sampling") {
    ParameterSpace box;
    box.lb = VectorXd::Zero(3);
    box.ub = VectorXd::Ones(3);
    BoundTransform identity = [](const VectorXd& lo,
                                 const VectorXd& hi) -> std::pair<VectorXd, VectorXd> {
        return {lo, hi};
    };
    RngStream ra(9, RngDomain::test, 0);
    RngStream rb(9, RngDomain::test, 0);
    const DrawResult dd = draw_and_discard(box, identity, 200, ra);
    const MatrixXd direct = draw_uniform_box(box.lb, box.ub, 200, rb);
    CHECK((dd.points - direct).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("draw-and-discard acceptance rate on a halved box") {
    ParameterSpace space;
    space.lb = VectorXd::Zero(2);
    space.ub = VectorXd::Ones(2);
    space.poly_a = MatrixXd::Ones(1, 2);
    space.poly_b = VectorXd::Ones(1);   // theta_1 + theta_2 <= 1, area 1/2
    RngStream rng(4, RngDomain::test, 0);
    const DrawResult res = draw_and_discard(space, nullptr, 2000000, rng);
    CHECK(res.underfilled);   // budget is 1e6 attempts
    CHECK(static_cast<double>(res.points.rows()) / 1e6 == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("draw-and-discard errors on an unreachable polytope") {
    ParameterSpace space;
    space.lb = VectorXd::Zero(2);
    space.ub = VectorXd::Ones(2);
    space.poly_a = MatrixXd::Zero(1, 2);
    space.poly_a(0, 0) = 1.0;
    space.poly_b = VectorXd::Constant(1, -5.0);   // theta_1 <= -5 never holds in the box
    RngStream rng(5, RngDomain::test, 0);
    CHECK_THROWS_AS(draw_and_discard(space, nullptr, 10, rng), std::runtime_error);
}

TEST_CASE("positive-EI seeding") {
    ParameterSpace space;
    space.lb = VectorXd::Zero(2);
    space.ub = VectorXd::Ones(2);
    VectorXd q(2);
    q << 1.0, 0.0;
    VectorXd star(2);
    star << 0.4, 0.5;

    EiSeedContext ctx;
    ctx.theta_star = star;
    ctx.q = q;
    ctx.gap = 0.6;
    ctx.space = &space;
    // surrogate says the constraint is slack everywhere: EI > 0 iff q'theta > q'star
    ctx.ei = [&](const VectorXd& th) { return std::max(0.0, q.dot(th) - q.dot(star)); };
    ctx.draw_candidate = [&](RngStream& r) {
        VectorXd cand(2);
        cand << r.uniform(0.4, 1.0), r.uniform01();
        return cand;
    };

    RngStream rng(6, RngDomain::test, 0);
    const EiSeeds seeds = seed_positive_ei(ctx, 10, rng);
    CHECK(seeds.reached_min);
    CHECK(seeds.starts.rows() >= 10);
    // every kept start except the appended nudge has EI > 0, and theta_star
    // itself is never returned unperturbed (its EI is exactly zero)
    for (int i = 0; i < seeds.starts.rows() - 1; ++i)
        CHECK(ctx.ei(seeds.starts.row(i).transpose()) > 0.0);
    for (int i = 0; i < seeds.starts.rows(); ++i)
        CHECK((seeds.starts.row(i).transpose() - star).norm() > 0.0);

    // when EI is zero everywhere only the nudge start comes back, flagged
    EiSeedContext dead = ctx;
    dead.ei = [](const VectorXd&) { return 0.0; };
    RngStream rng2(7, RngDomain::test, 0);
    const EiSeeds none = seed_positive_ei(dead, 10, rng2);
    CHECK_FALSE(none.reached_min);
    CHECK(none.starts.rows() == 1);
}
