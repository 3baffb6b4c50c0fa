#include "cpi/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "cpi/parallel.hpp"

namespace cpi {

namespace {

VectorXd project_box(const NlpProblem& prob, const VectorXd& x) {
    return x.cwiseMax(prob.lb).cwiseMin(prob.ub);
}

struct ConstraintSet {
    const NlpProblem& prob;
    int total;   // nonlinear + linear rows

    void eval(const VectorXd& x, VectorXd& vals, MatrixXd* jac) const {
        vals.resize(total);
        if (jac) jac->resize(total, prob.dim());
        if (prob.n_ineq > 0) {
            VectorXd nl;
            if (jac) {
                MatrixXd nj;
                prob.constraints(x, nl, &nj);
                jac->topRows(prob.n_ineq) = nj;
            } else {
                prob.constraints(x, nl, nullptr);
            }
            vals.head(prob.n_ineq) = nl;
        }
        const int lin = static_cast<int>(prob.lin_a.rows());
        if (lin > 0) {
            vals.tail(lin) = prob.lin_a * x - prob.lin_b;
            if (jac) jac->bottomRows(lin) = prob.lin_a;
        }
    }
};

} // namespace

LocalSolution solve_local(const NlpProblem& prob, const VectorXd& start) {
    const int d = prob.dim();
    const int lin = static_cast<int>(prob.lin_a.rows());
    const ConstraintSet cons{prob, prob.n_ineq + lin};
    const int m = cons.total;

    VectorXd x = project_box(prob, start);
    VectorXd mu = VectorXd::Zero(m);
    double rho = 10.0;

    VectorXd cvals(m), scratch(m);
    MatrixXd cjac;

    // f + (1/(2rho)) sum(max(0, mu + rho c)^2 - mu^2), with gradient
    auto augmented = [&](const VectorXd& xx, VectorXd* grad) -> double {
        double f;
        if (grad) {
            f = prob.objective(xx, grad);
            cons.eval(xx, scratch, &cjac);
        } else {
            f = prob.objective(xx, nullptr);
            cons.eval(xx, scratch, nullptr);
        }
        if (!std::isfinite(f)) return kInf;
        double pen = 0.0;
        for (int i = 0; i < m; ++i) {
            if (!std::isfinite(scratch(i))) return kInf;
            const double t = mu(i) + rho * scratch(i);
            if (t > 0.0) {
                pen += t * t - mu(i) * mu(i);
                if (grad) *grad += t * cjac.row(i).transpose();
            } else {
                pen -= mu(i) * mu(i);
            }
        }
        return f + pen / (2.0 * rho);
    };

    LocalSolution best;
    best.x = x;

    auto record = [&](const VectorXd& xx) {
        VectorXd fgrad(d);
        const double f = prob.objective(xx, &fgrad);
        cons.eval(xx, cvals, &cjac);
        double viol = 0.0;
        VectorXd lag = fgrad;
        double comp = 0.0;
        for (int i = 0; i < m; ++i) {
            viol = std::max(viol, cvals(i));
            lag += mu(i) * cjac.row(i).transpose();
            comp = std::max(comp, std::fabs(mu(i) * std::min(cvals(i), 0.0)));
        }
        viol = std::max(viol, 0.0);
        const VectorXd proj_step = project_box(prob, xx - lag) - xx;
        const double kkt = std::max({proj_step.cwiseAbs().maxCoeff(), viol, comp});
        if (std::isfinite(f) &&
            (viol < best.max_constraint_violation - 1e-12 ||
             (viol <= best.max_constraint_violation + 1e-12 &&
              f + 1e-12 * std::fabs(f) < best.objective))) {
            best.x = xx;
            best.objective = f;
            best.kkt_residual = kkt;
            best.max_constraint_violation = viol;
        }
        return kkt;
    };

    const int outer_max = 25;
    const int inner_max = 120;
    double inner_tol = 1e-5;
    double prev_viol = kInf;

    for (int outer = 0; outer < outer_max; ++outer) {
        // Inner: projected Barzilai-Borwein descent with nonmonotone Armijo.
        VectorXd g(d);
        double f_al = augmented(x, &g);
        if (!std::isfinite(f_al)) {
            x = project_box(prob, 0.5 * (prob.lb + prob.ub));
            f_al = augmented(x, &g);
            if (!std::isfinite(f_al)) break;
        }
        double alpha = 1.0 / std::max(1e-8, g.cwiseAbs().maxCoeff());
        std::deque<double> hist{f_al};

        for (int inner = 0; inner < inner_max; ++inner) {
            const VectorXd dvec = project_box(prob, x - alpha * g) - x;
            const double dnorm = dvec.cwiseAbs().maxCoeff();
            if (dnorm <= inner_tol * (1.0 + x.cwiseAbs().maxCoeff())) break;

            const double dir_deriv = g.dot(dvec);
            const double f_ref = *std::max_element(hist.begin(), hist.end());
            double t = 1.0;
            VectorXd xt = x + dvec;
            VectorXd gt(d);
            double ft = augmented(xt, &gt);
            int backtracks = 0;
            while (!(ft <= f_ref + 1e-4 * t * dir_deriv) && backtracks < 40) {
                t *= 0.5;
                xt = x + t * dvec;
                ft = augmented(xt, &gt);
                ++backtracks;
            }
            if (backtracks >= 40) break;  // no usable step along this direction

            const VectorXd s = xt - x;
            const VectorXd y = gt - g;
            const double sy = s.dot(y);
            alpha = sy > 1e-14 ? std::clamp(s.dot(s) / sy, 1e-10, 1e10)
                               : std::clamp(alpha * 2.0, 1e-10, 1e10);
            x = xt;
            g = gt;
            f_al = ft;
            hist.push_back(ft);
            if (hist.size() > 5) hist.pop_front();
        }

        cons.eval(x, cvals, nullptr);
        double viol = 0.0;
        for (int i = 0; i < m; ++i) viol = std::max(viol, cvals(i));
        viol = std::max(0.0, viol);

        const double kkt = record(x);
        if (kkt <= 1e-6) {
            best.converged = true;
            break;
        }

        for (int i = 0; i < m; ++i) mu(i) = std::max(0.0, mu(i) + rho * cvals(i));
        if (viol > 1e-9 && viol > 0.25 * prev_viol) rho = std::min(rho * 5.0, 1e10);
        prev_viol = viol;
        inner_tol = std::max(inner_tol * 0.2, 1e-10);
    }
    if (!best.converged) best.kkt_residual = std::min(best.kkt_residual, record(best.x));
    best.converged = best.converged || best.kkt_residual <= 1e-6;
    return best;
}

MultistartResult multistart(const NlpProblem& prob, const MatrixXd& starts, int workers) {
    const int k = static_cast<int>(starts.rows());
    if (k < 1) throw std::invalid_argument("multistart needs at least one start");
    MultistartResult res;
    res.all.resize(k);
    parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t i) {
        res.all[i] = solve_local(prob, starts.row(i).transpose());
    });
    for (int i = 0; i < k; ++i) {
        const LocalSolution& s = res.all[i];
        if (!(s.max_constraint_violation <= kNlpFeasTol) || !std::isfinite(s.objective)) continue;
        if (!res.found) {
            res.best = s;
            res.best_start = i;
            res.found = true;
            continue;
        }
        const double cur = res.best.objective;
        if (s.objective < cur - 1e-12) {
            res.best = s;
            res.best_start = i;
        } else if (s.objective <= cur + 1e-12 && s.kkt_residual < res.best.kkt_residual) {
            res.best = s;
            res.best_start = i;
        }
    }
    return res;
}

MatrixXd draw_uniform_box(const VectorXd& lb, const VectorXd& ub, int count, RngStream& rng) {
    const int d = static_cast<int>(lb.size());
    MatrixXd out(count, d);
    for (int i = 0; i < count; ++i)
        for (int k = 0; k < d; ++k) out(i, k) = rng.uniform(lb(k), ub(k));
    return out;
}

DrawResult draw_and_discard(const ParameterSpace& space, const BoundTransform& bound_transform,
                            int count, RngStream& rng, const MatrixXd& extra_a,
                            const VectorXd& extra_b) {
    const int d = space.dim();
    VectorXd lo = space.lb, hi = space.ub;
    if (bound_transform) {
        auto [tlo, thi] = bound_transform(lo, hi);
        lo = tlo;
        hi = thi;
    }
    const int extra = static_cast<int>(extra_a.rows());
    const long budget = 1000000;

    DrawResult res;
    std::vector<VectorXd> accepted;
    accepted.reserve(count);
    VectorXd theta(d);
    for (long attempt = 0; attempt < budget && static_cast<int>(accepted.size()) < count;
         ++attempt) {
        for (int k = 0; k < d; ++k) theta(k) = rng.uniform(lo(k), hi(k));
        if (!space.contains(theta, 1e-12)) continue;
        if (extra > 0 && ((extra_a * theta - extra_b).maxCoeff() > 1e-12)) continue;
        accepted.push_back(theta);
    }
    if (accepted.empty()) throw std::runtime_error("polytope too thin: no acceptances in budget");
    res.underfilled = static_cast<int>(accepted.size()) < count;
    res.points.resize(static_cast<int>(accepted.size()), d);
    for (std::size_t i = 0; i < accepted.size(); ++i) res.points.row(static_cast<int>(i)) = accepted[i];
    return res;
}

EiSeeds seed_positive_ei(const EiSeedContext& ctx, int min_count, RngStream& rng) {
    const int d = static_cast<int>(ctx.theta_star.size());
    std::vector<VectorXd> starts;
    const long budget = std::max(2000L, 200L * min_count);

    long used = 0;
    for (; used < (2 * budget) / 3 && static_cast<int>(starts.size()) < min_count; ++used) {
        const VectorXd cand = ctx.draw_candidate(rng);
        if (cand.size() == 0) break;  // sampler exhausted
        if (ctx.ei(cand) > 0.0) starts.push_back(cand);
    }
    // Shrinking ball around theta_star: feasibility of the surrogate
    // constraint degrades smoothly, so points just past theta_star along +q
    // tend to keep positive EI.
    double radius = std::max(ctx.gap, 1e-6 * (ctx.space->ub - ctx.space->lb).norm());
    for (; used < budget && static_cast<int>(starts.size()) < min_count; ++used) {
        VectorXd cand(d);
        for (int k = 0; k < d; ++k)
            cand(k) = ctx.theta_star(k) + radius * rng.uniform(-1.0, 1.0);
        cand = cand + rng.uniform(0.0, radius) * ctx.q;
        cand = cand.cwiseMax(ctx.space->lb).cwiseMin(ctx.space->ub);
        if (ctx.ei(cand) > 0.0) starts.push_back(cand);
        if (used % 200 == 199) radius = std::max(0.5 * radius, 1e-9);
    }
    const bool reached = static_cast<int>(starts.size()) >= min_count;

    // Last-resort start: theta_star nudged along +q (EI is exactly zero at
    // theta_star itself).
    VectorXd nudge = ctx.theta_star + std::max(1e-8, 1e-3 * ctx.gap) * ctx.q;
    nudge = nudge.cwiseMax(ctx.space->lb).cwiseMin(ctx.space->ub);
    starts.push_back(nudge);

    EiSeeds out;
    out.reached_min = reached;
    out.starts.resize(static_cast<int>(starts.size()), d);
    for (std::size_t i = 0; i < starts.size(); ++i) out.starts.row(static_cast<int>(i)) = starts[i];
    return out;
}

} // namespace cpi
