#include "cpi/models/entry_game.hpp"

#include <cmath>
#include <stdexcept>

namespace cpi::models {

namespace {

constexpr double kPx = 0.25;

const int kSupport[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};

struct Indices {
    double a1, a1d, a2, a2d;   // x_k' beta_k and x_k' (beta_k + delta_k)
};

Indices indices_at(const VectorXd& th, int x1, int x2) {
    Indices ix;
    ix.a1 = th(0) + x1 * th(1);
    ix.a2 = th(2) + x2 * th(3);
    ix.a1d = (th(0) + th(4)) + x1 * (th(1) + th(5));
    ix.a2d = (th(2) + th(6)) + x2 * (th(3) + th(7));
    return ix;
}

} // namespace

FhatResult EntryGameModel::f_hat(const MatrixXd& data) const {
    const int n = static_cast<int>(data.rows());
    FhatResult out;
    out.f_ineq.setZero(8);
    VectorXd f_eq_half = VectorXd::Zero(8);

    for (int i = 0; i < n; ++i) {
        const bool y1 = data(i, 0) > 0.5;
        const bool y2 = data(i, 1) > 0.5;
        const int x1 = data(i, 3) > 0.0 ? 1 : -1;
        const int x2 = data(i, 5) > 0.0 ? 1 : -1;
        int ii = -1;
        for (int s = 0; s < 4; ++s)
            if (kSupport[s][0] == x1 && kSupport[s][1] == x2) ii = s;
        if (!y1 && y2) out.f_ineq(2 * ii) += 1.0;
        if (!y1 && !y2) f_eq_half(2 * ii) += 1.0;
        if (y1 && y2) f_eq_half(2 * ii + 1) += 1.0;
    }
    out.f_ineq /= n;
    f_eq_half /= n;
    for (int ii = 0; ii < 4; ++ii) out.f_ineq(2 * ii + 1) = -out.f_ineq(2 * ii);

    out.f_eq.resize(16);
    out.f_eq << f_eq_half, -f_eq_half;

    // Bernoulli moments: drop when |fhat| is within the threshold of 0 or 1.
    out.keep_ineq.assign(8, 1);
    out.keep_eq.assign(16, 1);
    for (int j = 0; j < 8; ++j) {
        const double a = std::fabs(out.f_ineq(j));
        if (a < f_keep_threshold || a > 1.0 - f_keep_threshold) out.keep_ineq[j] = 0;
    }
    for (int j = 0; j < 16; ++j) {
        const double a = std::fabs(out.f_eq(j));
        if (a < f_keep_threshold || a > 1.0 - f_keep_threshold) out.keep_eq[j] = 0;
    }
    out.paired.resize(8);
    for (int ii = 0; ii < 4; ++ii) {
        out.paired[2 * ii] = ii + 1;
        out.paired[2 * ii + 1] = ii + 1;
    }
    return out;
}

void EntryGameModel::g(const VectorXd& theta, VectorXd& g_ineq, VectorXd& g_eq) const {
    g_ineq.resize(8);
    VectorXd g_eq_half(8);
    for (int ii = 0; ii < 4; ++ii) {
        const Indices ix = indices_at(theta, kSupport[ii][0], kSupport[ii][1]);
        const double p1 = normal_cdf(-ix.a1), p1d = normal_cdf(-ix.a1d);
        const double p2 = normal_cdf(-ix.a2), p2d = normal_cdf(-ix.a2d);
        // upper bound on P(Y = (0,1) | x)
        g_ineq(2 * ii) = -p1d * (1.0 - p2) * kPx;
        // lower bound: subtract the multiplicity rectangle
        g_ineq(2 * ii + 1) = (p1d * (1.0 - p2) - (p1d - p1) * (p2d - p2)) * kPx;
        // point-identified outcomes
        g_eq_half(2 * ii) = -p1 * p2 * kPx;                         // (0,0)
        g_eq_half(2 * ii + 1) = -(1.0 - p1d) * (1.0 - p2d) * kPx;   // (1,1)
    }
    g_eq.resize(16);
    g_eq << g_eq_half, -g_eq_half;
}

void EntryGameModel::g_gradient(const VectorXd& theta, MatrixXd& dg_ineq, MatrixXd& dg_eq) const {
    dg_ineq.setZero(8, 8);
    MatrixXd dg_eq_half = MatrixXd::Zero(8, 8);

    for (int ii = 0; ii < 4; ++ii) {
        const int x1 = kSupport[ii][0], x2 = kSupport[ii][1];
        const Indices ix = indices_at(theta, x1, x2);
        const double p1 = normal_cdf(-ix.a1), p1d = normal_cdf(-ix.a1d);
        const double p2 = normal_cdf(-ix.a2), p2d = normal_cdf(-ix.a2d);
        const double q1 = normal_pdf(-ix.a1), q1d = normal_pdf(-ix.a1d);
        const double q2 = normal_pdf(-ix.a2), q2d = normal_pdf(-ix.a2d);
        const Eigen::Vector2d xv1(1.0, x1), xv2(1.0, x2);

        // upper bound row: g = -p1d (1 - p2) px
        dg_ineq.block<1, 2>(2 * ii, 0) = (q1d * (1.0 - p2) * kPx) * xv1.transpose();
        dg_ineq.block<1, 2>(2 * ii, 4) = (q1d * (1.0 - p2) * kPx) * xv1.transpose();
        dg_ineq.block<1, 2>(2 * ii, 2) = (-p1d * q2 * kPx) * xv2.transpose();
        // delta2 block stays zero

        // lower bound row: g = [p1d (1 - p2) - (p1d - p1)(p2d - p2)] px
        dg_ineq.block<1, 2>(2 * ii + 1, 0) =
            ((-q1d * (1.0 - p2) - (q1 - q1d) * (p2d - p2)) * kPx) * xv1.transpose();
        dg_ineq.block<1, 2>(2 * ii + 1, 4) =
            (q1d * (-(1.0 - p2) + (p2d - p2)) * kPx) * xv1.transpose();
        dg_ineq.block<1, 2>(2 * ii + 1, 2) =
            ((p1d * q2 - (p1d - p1) * (q2 - q2d)) * kPx) * xv2.transpose();
        dg_ineq.block<1, 2>(2 * ii + 1, 6) = ((p1d - p1) * q2d * kPx) * xv2.transpose();

        // (0,0): g = -p1 p2 px
        dg_eq_half.block<1, 2>(2 * ii, 0) = (q1 * p2 * kPx) * xv1.transpose();
        dg_eq_half.block<1, 2>(2 * ii, 2) = (p1 * q2 * kPx) * xv2.transpose();

        // (1,1): g = -(1 - p1d)(1 - p2d) px
        dg_eq_half.block<1, 2>(2 * ii + 1, 0) = (-q1d * (1.0 - p2d) * kPx) * xv1.transpose();
        dg_eq_half.block<1, 2>(2 * ii + 1, 4) = (-q1d * (1.0 - p2d) * kPx) * xv1.transpose();
        dg_eq_half.block<1, 2>(2 * ii + 1, 2) = (-(1.0 - p1d) * q2d * kPx) * xv2.transpose();
        dg_eq_half.block<1, 2>(2 * ii + 1, 6) = (-(1.0 - p1d) * q2d * kPx) * xv2.transpose();
    }
    dg_eq.resize(16, 8);
    dg_eq << dg_eq_half, -dg_eq_half;
}

void EntryGameModel::sigma_hat(const MatrixXd& data, const VectorXd& f_ineq, const VectorXd& f_eq,
                               VectorXd& sigma_ineq, VectorXd& sigma_eq) const {
    (void)data;
    sigma_ineq = (f_ineq.array().abs() * (1.0 - f_ineq.array().abs())).sqrt();
    sigma_eq = (f_eq.array().abs() * (1.0 - f_eq.array().abs())).sqrt();
}

std::shared_ptr<EntryGameModel> entry_game_model(double f_keep_threshold) {
    auto m = std::make_shared<EntryGameModel>();
    m->f_keep_threshold = f_keep_threshold;
    return m;
}

ParameterSpace entry_game_space() {
    ParameterSpace space;
    space.lb.resize(8);
    space.ub.resize(8);
    // beta blocks
    space.lb(0) = -2.0; space.ub(0) = 2.0;
    space.lb(1) = -1.0; space.ub(1) = 1.0;
    space.lb(2) = -2.0; space.ub(2) = 2.0;
    space.lb(3) = -1.0; space.ub(3) = 1.0;
    // delta blocks: constant in [-1.5, -0.3], slope in [-0.3, 0.3]
    space.lb(4) = -1.5; space.ub(4) = -0.3;
    space.lb(5) = -0.3; space.ub(5) = 0.3;
    space.lb(6) = -1.5; space.ub(6) = -0.3;
    space.lb(7) = -0.3; space.ub(7) = 0.3;
    return space;
}

VectorXd entry_game_theta_true() {
    VectorXd theta(8);
    theta << 0.2, 0.3, 0.2, 0.3, -0.8, -0.1, -0.8, -0.1;
    return theta;
}

MatrixXd simulate_entry_game(const VectorXd& theta_true, int n, double r,
                             SelectionRule selection_rule, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("correlation r must be in [0, 1)");
    RngStream rng(seed, RngDomain::sim_markets, 0);
    MatrixXd data(n, 6);
    const double r_orth = std::sqrt(1.0 - r * r);

    for (int i = 0; i < n; ++i) {
        const int x1 = rng.uniform01() < 0.5 ? -1 : 1;
        const int x2 = rng.uniform01() < 0.5 ? -1 : 1;
        const double u1 = rng.normal();
        const double u2 = r * u1 + r_orth * rng.normal();
        const Indices ix = indices_at(theta_true, x1, x2);

        const bool ne00 = u1 < -ix.a1 && u2 < -ix.a2;
        const bool ne01 = u1 < -ix.a1d && u2 >= -ix.a2;
        const bool ne10 = u1 >= -ix.a1 && u2 < -ix.a2d;
        const bool ne11 = u1 >= -ix.a1d && u2 >= -ix.a2d;

        int y1 = 0, y2 = 0;
        if (ne01 && ne10) {
            // multiplicity region: apply the selection rule
            bool pick01 = selection_rule == SelectionRule::always_01;
            if (selection_rule == SelectionRule::uniform) pick01 = rng.uniform01() < 0.5;
            y1 = pick01 ? 0 : 1;
            y2 = pick01 ? 1 : 0;
        } else if (ne00) {
            y1 = 0;
            y2 = 0;
        } else if (ne11) {
            y1 = 1;
            y2 = 1;
        } else if (ne01) {
            y1 = 0;
            y2 = 1;
        } else if (ne10) {
            y1 = 1;
            y2 = 0;
        } else {
            // unreachable when x'delta <= 0 on the support; keep the market
            // as a no-entry outcome rather than aborting the stream
            y1 = 0;
            y2 = 0;
        }
        data(i, 0) = y1;
        data(i, 1) = y2;
        data(i, 2) = 1.0;
        data(i, 3) = x1;
        data(i, 4) = 1.0;
        data(i, 5) = x2;
    }
    return data;
}

} // namespace cpi::models
