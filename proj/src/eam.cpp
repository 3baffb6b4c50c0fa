#include "cpi/eam.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cpi/lp.hpp"
#include "cpi/optim.hpp"
#include "cpi/parallel.hpp"

namespace cpi {

namespace {

constexpr double kFeasPointTol = 1e-10;   // constraint violation counted as zero
constexpr double kBoundaryTol = 1e-4;

/// Kept stacked moment rows with their studentizing scale and gradients.
struct StudentizedRows {
    const Problem* prob;
    const EmpiricalMoments* em;
    std::vector<int> rows;      // indices into the stacked layout
    VectorXd inv_sigma;         // sqrt(n) / sigma per kept row
    VectorXd f_shift;           // fhat per kept row

    explicit StudentizedRows(const Problem& p, const EmpiricalMoments& m) : prob(&p), em(&m) {
        const std::vector<char> keep = m.keep_stacked();
        const VectorXd f = m.f_stacked();
        const VectorXd sigma = m.sigma_stacked();
        const double root_n = p.sqrt_n();
        for (int j = 0; j < static_cast<int>(keep.size()); ++j) {
            if (!keep[j]) continue;
            rows.push_back(j);
            inv_sigma.conservativeResize(rows.size());
            f_shift.conservativeResize(rows.size());
            inv_sigma(rows.size() - 1) = root_n / sigma(j);
            f_shift(rows.size() - 1) = f(j);
        }
    }

    int count() const { return static_cast<int>(rows.size()); }

    VectorXd values(const VectorXd& theta, MatrixXd* jac = nullptr) const {
        VectorXd g_ineq, g_eq;
        prob->model->g(theta, g_ineq, g_eq);
        const int j1 = em->counts.j1;
        VectorXd out(count());
        for (int i = 0; i < count(); ++i) {
            const int r = rows[i];
            const double g = r < j1 ? g_ineq(r) : g_eq(r - j1);
            out(i) = inv_sigma(i) * (f_shift(i) + g);
        }
        if (jac) {
            MatrixXd dg_ineq, dg_eq;
            prob->model->g_gradient(theta, dg_ineq, dg_eq);
            jac->resize(count(), prob->dim());
            for (int i = 0; i < count(); ++i) {
                const int r = rows[i];
                jac->row(i) = inv_sigma(i) *
                              (r < j1 ? dg_ineq.row(r) : dg_eq.row(r - j1));
            }
        }
        return out;
    }
};

MatrixXd space_lin_rows(const ParameterSpace& space, int extra_cols) {
    const int s = space.poly_rows();
    MatrixXd a(s, space.dim() + extra_cols);
    if (s > 0) {
        a.leftCols(space.dim()) = space.poly_a;
        a.rightCols(extra_cols).setZero();
    }
    return a;
}

/// min over theta of max_j rows_j(theta) via the gamma reformulation.
NlpProblem make_minmax_problem(const ParameterSpace& space, const StudentizedRows& rows,
                               const KrigingSurrogate* surrogate) {
    const int d = space.dim();
    NlpProblem prob;
    prob.lb.resize(d + 1);
    prob.ub.resize(d + 1);
    prob.lb.head(d) = space.lb;
    prob.ub.head(d) = space.ub;
    prob.lb(d) = -1e9;
    prob.ub(d) = 1e9;
    prob.lin_a = space_lin_rows(space, 1);
    prob.lin_b = space.poly_b;
    prob.objective = [d](const VectorXd& z, VectorXd* grad) {
        if (grad) {
            grad->setZero(d + 1);
            (*grad)(d) = 1.0;
        }
        return z(d);
    };
    prob.n_ineq = rows.count();
    prob.constraints = [&rows, surrogate, d](const VectorXd& z, VectorXd& vals, MatrixXd* jac) {
        const VectorXd theta = z.head(d);
        MatrixXd hj;
        vals = rows.values(theta, jac ? &hj : nullptr);
        double c_l = 0.0;
        VectorXd c_grad;
        if (surrogate) {
            const KrigingPrediction pred = surrogate->predict(theta);
            c_l = pred.value;
            c_grad = pred.gradient;
        }
        vals.array() -= z(d) + c_l;
        if (jac) {
            jac->resize(vals.size(), d + 1);
            for (int i = 0; i < vals.size(); ++i) {
                jac->row(i).head(d) = hj.row(i);
                if (surrogate) jac->row(i).head(d) -= c_grad.transpose();
                (*jac)(i, d) = -1.0;
            }
        }
    };
    return prob;
}

MatrixXd append_gamma_start(const MatrixXd& theta_starts,
                            const std::function<double(const VectorXd&)>& gamma_at) {
    MatrixXd out(theta_starts.rows(), theta_starts.cols() + 1);
    out.leftCols(theta_starts.cols()) = theta_starts;
    for (int i = 0; i < theta_starts.rows(); ++i)
        out(i, theta_starts.cols()) = gamma_at(theta_starts.row(i).transpose());
    return out;
}

MatrixXd sample_space(const ParameterSpace& space, const BoundTransform& transform, int count,
                      RngStream& rng) {
    if (space.poly_rows() == 0 && !transform)
        return draw_uniform_box(space.lb, space.ub, count, rng);
    return draw_and_discard(space, transform, count, rng).points;
}

double ray_max_step(const ParameterSpace& space, const VectorXd& from, const VectorXd& dir) {
    double t = kInf;
    for (int k = 0; k < space.dim(); ++k) {
        if (dir(k) > 1e-15) t = std::min(t, (space.ub(k) - from(k)) / dir(k));
        else if (dir(k) < -1e-15) t = std::min(t, (space.lb(k) - from(k)) / dir(k));
    }
    for (int i = 0; i < space.poly_rows(); ++i) {
        const double adir = space.poly_a.row(i).dot(dir);
        if (adir > 1e-15)
            t = std::min(t, (space.poly_b(i) - space.poly_a.row(i).dot(from)) / adir);
    }
    return std::max(0.0, t);
}

struct Deduped {
    MatrixXd design;
    VectorXd responses;
};

// Keeps the earlier-evaluated point of any pair closer than the dedupe radius.
Deduped dedupe_for_fit(const std::vector<EvalPoint>& evaluated, double radius) {
    std::vector<int> kept;
    for (int i = 0; i < static_cast<int>(evaluated.size()); ++i) {
        bool close = false;
        for (int j : kept) {
            if ((evaluated[i].theta - evaluated[j].theta).norm() < radius) {
                close = true;
                break;
            }
        }
        if (!close) kept.push_back(i);
    }
    Deduped out;
    const int d = static_cast<int>(evaluated.front().theta.size());
    out.design.resize(static_cast<int>(kept.size()), d);
    out.responses.resize(static_cast<int>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        out.design.row(static_cast<int>(i)) = evaluated[kept[i]].theta;
        out.responses(static_cast<int>(i)) = evaluated[kept[i]].c_hat;
    }
    return out;
}

} // namespace

CritvalContext EamContext::critval_ctx() const {
    CritvalContext ctx;
    ctx.model = problem->model.get();
    ctx.moments = moments;
    ctx.boot = boot;
    ctx.space = &problem->space;
    ctx.p = problem->p;
    ctx.opts = &problem->opts;
    ctx.sqrt_n = problem->sqrt_n();
    ctx.workers = problem->opts.parallel;
    return ctx;
}

EvalPoint EamContext::evaluate(const VectorXd& theta, long* lp_count,
                               int workers_override) const {
    CritvalContext cctx = critval_ctx();
    if (workers_override > 0) cctx.workers = workers_override;
    const CritvalResult res = critval(theta, cctx);
    if (lp_count) *lp_count += res.lp_count;

    EvalPoint pt;
    pt.theta = theta;
    pt.c_hat = res.c_hat;
    const VectorXd h = studentized_moments(theta, *moments, *problem->model);
    double max_h = -kInf;
    for (int j = 0; j < h.size(); ++j) max_h = std::max(max_h, h(j));
    pt.max_violation = max_h - pt.c_hat;
    pt.constraint_violation = std::max(0.0, pt.max_violation);
    pt.feasible = pt.constraint_violation <= kFeasPointTol;
    return pt;
}

std::vector<EvalPoint> EamContext::evaluate_all(const MatrixXd& thetas, long* lp_count) const {
    const int n = static_cast<int>(thetas.rows());
    std::vector<EvalPoint> out(n);
    std::vector<long> counts(n, 0);
    const int workers = problem->opts.parallel;
    // fan out across points; the critical-value loop inside stays serial
    parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        out[i] = evaluate(thetas.row(static_cast<int>(i)).transpose(), &counts[i], 1);
    });
    if (lp_count)
        for (long c : counts) *lp_count += c;
    return out;
}

double contracted_ceiling(double q_theta_star, double opt_dagger, double h_rate, int counter) {
    return q_theta_star + (opt_dagger - q_theta_star) / std::pow(h_rate, counter);
}

int update_contraction_counter(int counter, double q_theta_star, double q_theta_star_prev,
                               double ceiling) {
    if (std::fabs(q_theta_star - q_theta_star_prev) < 1e-6) ++counter;
    if (counter > 0 && std::fabs(ceiling - q_theta_star) < kBoundaryTol) --counter;
    return counter;
}

ConvergenceReport check_convergence(int iter, double q_theta_mstep, double q_theta_star,
                                    double q_theta_star_prev, int internal_feasible_found,
                                    double ceiling, double max_violation_at_star,
                                    const Options& opts) {
    ConvergenceReport rep;
    rep.min_iterations = iter >= opts.eam_minit;
    rep.ei_projection_small = std::fabs(q_theta_mstep - q_theta_star) < opts.eam_obj_tol;
    rep.projection_stable = std::fabs(q_theta_star - q_theta_star_prev) < opts.eam_tol;
    rep.internal_feasible = internal_feasible_found >= 1;
    rep.off_contraction_boundary = std::fabs(ceiling - q_theta_star) > kBoundaryTol;
    rep.max_violation_small = std::isinf(opts.eam_maxviol_tol) ||
                              std::fabs(max_violation_at_star) < opts.eam_maxviol_tol;
    rep.converged = rep.min_iterations && rep.ei_projection_small && rep.projection_stable &&
                    rep.internal_feasible && rep.off_contraction_boundary &&
                    rep.max_violation_small;
    return rep;
}

FeasibleSearchResult feasible_search_direct(const EamContext& ctx, RngStream& rng) {
    const Problem& P = *ctx.problem;
    const int d = P.dim();
    const StudentizedRows rows(P, *ctx.moments);
    FeasibleSearchResult res;

    const int n_starts = std::max(10, 2 * d);
    MatrixXd theta_starts(n_starts + 1, d);
    theta_starts.topRows(n_starts) = sample_space(P.space, P.bound_transform, n_starts, rng);
    theta_starts.row(n_starts) = P.theta_0.transpose();   // the user's initial guess
    NlpProblem prob = make_minmax_problem(P.space, rows, nullptr);
    auto gamma_at = [&](const VectorXd& th) { return rows.values(th).maxCoeff(); };
    const MatrixXd starts = append_gamma_start(theta_starts, gamma_at);

    const MultistartResult ms = multistart(prob, starts, P.opts.parallel);

    // Distinct local solutions (plus theta_0 itself), checked against the
    // relaxed condition with c_hat.
    const double radius = 1e-6 * P.space.diameter();
    std::vector<VectorXd> distinct{P.theta_0};
    for (const LocalSolution& s : ms.all) {
        if (!std::isfinite(s.objective) || s.max_constraint_violation > kNlpFeasTol) continue;
        const VectorXd th = s.x.head(d);
        res.best_minmax = std::min(res.best_minmax, s.objective);
        bool dup = false;
        for (const VectorXd& t : distinct)
            if ((t - th).norm() < radius) dup = true;
        if (!dup) distinct.push_back(th);
    }

    MatrixXd to_eval(static_cast<int>(distinct.size()), d);
    for (std::size_t i = 0; i < distinct.size(); ++i) to_eval.row(static_cast<int>(i)) = distinct[i];
    res.evaluated = ctx.evaluate_all(to_eval, &res.lp_count);
    for (const EvalPoint& pt : res.evaluated)
        if (pt.feasible) res.feasible.push_back(pt.theta);
    return res;
}

FeasibleSearchResult feasible_search_eam(const EamContext& ctx, RngStream& rng) {
    const Problem& P = *ctx.problem;
    const int d = P.dim();
    const StudentizedRows rows(P, *ctx.moments);
    const double radius = 1e-6 * P.space.diameter();
    FeasibleSearchResult res;

    const MatrixXd init = sample_space(P.space, P.bound_transform, P.opts.mbase * d, rng);
    res.evaluated = ctx.evaluate_all(init, &res.lp_count);

    auto harvest = [&]() {
        for (const EvalPoint& pt : res.evaluated) {
            res.best_minmax = std::min(res.best_minmax, pt.max_violation + pt.c_hat);
            if (pt.feasible) res.feasible.push_back(pt.theta);
        }
        return !res.feasible.empty();
    };
    if (harvest()) return res;

    for (int it = 0; it < P.opts.eam_maxit; ++it) {
        const Deduped dd = dedupe_for_fit(res.evaluated, radius);
        if (dd.design.rows() < d + 1) break;
        const KrigingSurrogate surrogate = KrigingSurrogate::fit(dd.design, dd.responses);

        NlpProblem prob = make_minmax_problem(P.space, rows, &surrogate);
        const int n_starts = std::max(10, 2 * d);
        const MatrixXd theta_starts = sample_space(P.space, P.bound_transform, n_starts, rng);
        auto gamma_at = [&](const VectorXd& th) {
            return (rows.values(th).array() - surrogate.predict(th).value).maxCoeff();
        };
        const MultistartResult ms = multistart(prob, append_gamma_start(theta_starts, gamma_at),
                                               P.opts.parallel);
        if (!ms.found) break;
        VectorXd theta_new = ms.best.x.head(d);

        bool dup = false;
        for (const EvalPoint& pt : res.evaluated)
            if ((pt.theta - theta_new).norm() < radius) dup = true;
        if (dup) theta_new = sample_space(P.space, P.bound_transform, 1, rng).row(0).transpose();

        EvalPoint pt = ctx.evaluate(theta_new, &res.lp_count);
        res.evaluated.push_back(pt);
        res.best_minmax = std::min(res.best_minmax, pt.max_violation + pt.c_hat);
        if (pt.feasible) {
            res.feasible.push_back(pt.theta);
            return res;
        }
    }
    return res;
}

namespace {

struct StarTracker {
    const VectorXd& q;
    std::optional<int> best_index{};      // into evaluated, feasible best
    std::optional<int> fallback_index{};  // least violating

    void ingest(const std::vector<EvalPoint>& evaluated, int from, EamState& state,
                const std::vector<char>& inherited) {
        for (int i = from; i < static_cast<int>(evaluated.size()); ++i) {
            const EvalPoint& pt = evaluated[i];
            if (pt.feasible) {
                if (i >= static_cast<int>(inherited.size()) || !inherited[i])
                    ++state.internal_feasible_found;
                if (!best_index.has_value() ||
                    q.dot(pt.theta) > q.dot(evaluated[*best_index].theta))
                    best_index = i;
            }
            if (!fallback_index.has_value() ||
                pt.constraint_violation < evaluated[*fallback_index].constraint_violation)
                fallback_index = i;
        }
        if (best_index.has_value()) {
            state.theta_star = evaluated[*best_index].theta;
            state.theta_star_is_fallback = false;
        } else if (fallback_index.has_value()) {
            state.theta_star = evaluated[*fallback_index].theta;
            state.theta_star_is_fallback = true;
        }
    }

    const EvalPoint& star(const std::vector<EvalPoint>& evaluated) const {
        return evaluated[best_index.has_value() ? *best_index : *fallback_index];
    }
};

} // namespace

DirectionResult run_eam(const EamContext& ctx, const VectorXd& q,
                        const std::vector<VectorXd>& theta_feas,
                        const std::vector<EvalPoint>& warm_start, RngStream& rng) {
    const auto t_begin = std::chrono::steady_clock::now();
    const Problem& P = *ctx.problem;
    const Options& opts = P.opts;
    const int d = P.dim();
    const double radius = 1e-6 * P.space.diameter();
    const StudentizedRows rows(P, *ctx.moments);

    DirectionResult out;
    EamState state;
    state.q = q;
    state.opt_dagger = max_linear_over_space(P.space, q);

    std::vector<char> inherited;
    StarTracker tracker{state.q};

    // Warm-start evaluations from the feasible search are inherited as-is.
    for (const EvalPoint& pt : warm_start) {
        state.evaluated.push_back(pt);
        inherited.push_back(1);
    }
    tracker.ingest(state.evaluated, 0, state, inherited);

    // Initial design: mbase*d space draws plus any supplied feasible points
    // not already evaluated.
    {
        std::vector<VectorXd> fresh;
        const MatrixXd draws = sample_space(P.space, P.bound_transform, opts.mbase * d, rng);
        for (int i = 0; i < draws.rows(); ++i) fresh.push_back(draws.row(i).transpose());
        for (const VectorXd& tf : theta_feas) {
            bool known = false;
            for (const EvalPoint& pt : state.evaluated)
                if ((pt.theta - tf).norm() < radius) known = true;
            if (!known) fresh.push_back(tf);
        }
        MatrixXd mat(static_cast<int>(fresh.size()), d);
        for (std::size_t i = 0; i < fresh.size(); ++i) mat.row(static_cast<int>(i)) = fresh[i];
        const int before = static_cast<int>(state.evaluated.size());
        const std::vector<EvalPoint> evals = ctx.evaluate_all(mat, &out.lp_count);
        for (std::size_t i = 0; i < evals.size(); ++i) {
            state.evaluated.push_back(evals[i]);
            // supplied feasible points are inherited, space draws are internal
            inherited.push_back(i < static_cast<std::size_t>(draws.rows()) ? 0 : 1);
        }
        tracker.ingest(state.evaluated, before, state, inherited);
    }

    if (!state.theta_star.has_value())
        throw std::runtime_error("EAM started with no evaluated points");

    double v_prev = q.dot(*state.theta_star);
    out.last_report = ConvergenceReport{};

    for (state.iter = 1; state.iter <= opts.eam_maxit; ++state.iter) {
        const double v0 = q.dot(*state.theta_star);

        if (std::fabs(v0 - state.opt_dagger) < kBoundaryTol && !state.theta_star_is_fallback) {
            out.boundary_warning = true;
            out.converged = true;
            break;
        }

        // A-step
        const Deduped dd = dedupe_for_fit(state.evaluated, radius);
        if (dd.design.rows() < d + 1) break;
        const KrigingSurrogate surrogate = KrigingSurrogate::fit(dd.design, dd.responses);
        ++out.surrogate_fits;

        // M-step over the contracted space
        const double ceiling = contracted_ceiling(v0, state.opt_dagger, opts.h_rate, state.counter);
        const double gap = state.opt_dagger - v0;

        auto ei_value = [&](const VectorXd& theta) {
            const double a = q.dot(theta) - v0;
            if (a <= 0.0) return 0.0;
            const KrigingPrediction pred = surrogate.predict(theta);
            const double max_h = rows.values(theta).maxCoeff();
            const double sd = std::max(pred.sd, kSdFloor);
            return a * normal_cdf(-(max_h - pred.value) / sd);
        };

        // contracted sampling box (basis directions tighten one coordinate)
        ParameterSpace region = P.space;
        MatrixXd slab_a;
        VectorXd slab_b;
        if (P.p_is_basis) {
            const int k = P.basis_index;
            if (q(k) > 0) {
                region.lb(k) = std::max(region.lb(k), v0);
                region.ub(k) = std::min(region.ub(k), ceiling);
            } else {
                region.lb(k) = std::max(region.lb(k), -ceiling);
                region.ub(k) = std::min(region.ub(k), -v0);
            }
        } else {
            slab_a.resize(2, d);
            slab_a.row(0) = q.transpose();
            slab_a.row(1) = -q.transpose();
            slab_b.resize(2);
            slab_b << ceiling, -v0;
        }
        auto draw_candidate = [&](RngStream& r) -> VectorXd {
            VectorXd lo = region.lb, hi = region.ub;
            if (P.bound_transform) {
                auto [tlo, thi] = P.bound_transform(lo, hi);
                lo = tlo;
                hi = thi;
            }
            VectorXd cand(d);
            for (int attempt = 0; attempt < 500; ++attempt) {
                for (int k = 0; k < d; ++k) cand(k) = r.uniform(lo(k), hi(k));
                if (!region.contains(cand, 1e-12)) continue;
                if (slab_a.rows() > 0 && (slab_a * cand - slab_b).maxCoeff() > 1e-12) continue;
                return cand;
            }
            return VectorXd();
        };

        EiSeedContext seed_ctx;
        seed_ctx.ei = ei_value;
        seed_ctx.draw_candidate = draw_candidate;
        seed_ctx.theta_star = *state.theta_star;
        seed_ctx.q = q;
        seed_ctx.gap = gap;
        seed_ctx.space = &P.space;
        const EiSeeds ei_seeds = seed_positive_ei(seed_ctx, opts.ei_points, rng);

        // plus a deterministic ladder along +q across the contracted slab, so
        // the multistart explores beyond the positive-EI cluster at v0
        std::vector<VectorXd> ladder;
        {
            const double t_max = ray_max_step(P.space, *state.theta_star, q);
            for (const double f : {0.25, 0.5, 0.75, 0.999}) {
                const double t = std::min(f * (ceiling - v0), 0.999 * t_max);
                if (t > 1e-12) ladder.push_back(*state.theta_star + t * q);
            }
        }
        MatrixXd seeds(ei_seeds.starts.rows() + static_cast<int>(ladder.size()), d);
        seeds.topRows(ei_seeds.starts.rows()) = ei_seeds.starts;
        for (std::size_t i = 0; i < ladder.size(); ++i)
            seeds.row(ei_seeds.starts.rows() + static_cast<int>(i)) = ladder[i];

        // gamma-reformulated expected-improvement problem on (theta, gamma)
        NlpProblem ei_prob;
        ei_prob.lb.resize(d + 1);
        ei_prob.ub.resize(d + 1);
        ei_prob.lb.head(d) = region.lb;
        ei_prob.ub.head(d) = region.ub;
        ei_prob.lb(d) = -1e9;
        ei_prob.ub(d) = 1e9;
        {
            const int s = P.space.poly_rows();
            const int extra = P.p_is_basis ? 0 : 2;
            ei_prob.lin_a.resize(s + extra, d + 1);
            ei_prob.lin_b.resize(s + extra);
            if (s > 0) {
                ei_prob.lin_a.topLeftCorner(s, d) = P.space.poly_a;
                ei_prob.lin_a.topRightCorner(s, 1).setZero();
                ei_prob.lin_b.head(s) = P.space.poly_b;
            }
            if (extra > 0) {
                ei_prob.lin_a.block(s, 0, 2, d) = slab_a;
                ei_prob.lin_a.block(s, d, 2, 1).setZero();
                ei_prob.lin_b.tail(2) = slab_b;
            }
        }
        ei_prob.objective = [d](const VectorXd& z, VectorXd* grad) {
            if (grad) {
                grad->setZero(d + 1);
                (*grad)(d) = 1.0;
            }
            return z(d);
        };
        ei_prob.n_ineq = rows.count();
        ei_prob.constraints = [&](const VectorXd& z, VectorXd& vals, MatrixXd* jac) {
            const VectorXd theta = z.head(d);
            MatrixXd hjac;
            const VectorXd h = rows.values(theta, jac ? &hjac : nullptr);
            const KrigingPrediction pred = surrogate.predict(theta);
            const double a = q.dot(theta) - v0;
            const double sd = std::max(pred.sd, kSdFloor);
            const int m = rows.count();
            vals.resize(m);
            if (jac) jac->resize(m, d + 1);
            for (int j = 0; j < m; ++j) {
                const double u = -(h(j) - pred.value) / sd;
                const double cdf = normal_cdf(u);
                vals(j) = -a * cdf - z(d);
                if (jac) {
                    const VectorXd dsd = pred.sd > kSdFloor ? pred.sd_gradient
                                                            : VectorXd::Zero(d).eval();
                    const VectorXd du =
                        (-(hjac.row(j).transpose() - pred.gradient) * sd +
                         (h(j) - pred.value) * dsd) /
                        (sd * sd);
                    jac->row(j).head(d) =
                        (-q * cdf - a * normal_pdf(u) * du).transpose();
                    (*jac)(j, d) = -1.0;
                }
            }
        };
        auto ei_gamma_at = [&](const VectorXd& th) {
            const double a = q.dot(th) - v0;
            const KrigingPrediction pred = surrogate.predict(th);
            const double sd = std::max(pred.sd, kSdFloor);
            double g = -kInf;
            const VectorXd h = rows.values(th);
            for (int j = 0; j < h.size(); ++j)
                g = std::max(g, -a * normal_cdf(-(h(j) - pred.value) / sd));
            return g;
        };

        const MultistartResult ms =
            multistart(ei_prob, append_gamma_start(seeds, ei_gamma_at), opts.parallel);

        // A failed M-step gives no evidence that the improvement is exhausted,
        // so it blocks convergence criterion (2).
        double q_theta_mstep = v0 + 2.0 * opts.eam_obj_tol;
        double ei_mstep = 0.0;
        std::optional<VectorXd> theta_mstep;
        if (ms.found) {
            theta_mstep = ms.best.x.head(d);
            q_theta_mstep = q.dot(*theta_mstep);
            ei_mstep = ei_value(*theta_mstep);
        }
        out.ei_at_opt = ei_mstep;

        // Update: M-step point and a uniform draw when EI is positive, plus
        // two epsilon points just past theta_star along +q.
        std::vector<VectorXd> additions;
        if (theta_mstep.has_value() && ei_mstep > 0.0) {
            additions.push_back(*theta_mstep);
            additions.push_back(sample_space(P.space, P.bound_transform, 1, rng).row(0).transpose());
        }
        {
            const double delta1 = std::pow(opts.h_rate2, -(state.counter + 1));
            const double t_max = ray_max_step(P.space, *state.theta_star, q);
            for (const double delta : {delta1, 0.5 * delta1}) {
                const double t = std::min(delta * gap, 0.999 * t_max);
                if (t <= 1e-12) continue;
                additions.push_back(*state.theta_star + t * q);
            }
        }
        // drop additions that duplicate existing evaluations
        std::vector<VectorXd> fresh;
        for (const VectorXd& cand : additions) {
            bool dup = false;
            for (const EvalPoint& pt : state.evaluated)
                if ((pt.theta - cand).norm() < radius) dup = true;
            for (const VectorXd& f : fresh)
                if ((f - cand).norm() < radius) dup = true;
            if (!dup) fresh.push_back(cand);
        }
        if (!fresh.empty()) {
            MatrixXd mat(static_cast<int>(fresh.size()), d);
            for (std::size_t i = 0; i < fresh.size(); ++i) mat.row(static_cast<int>(i)) = fresh[i];
            const int before = static_cast<int>(state.evaluated.size());
            const std::vector<EvalPoint> evals = ctx.evaluate_all(mat, &out.lp_count);
            for (const EvalPoint& pt : evals) {
                state.evaluated.push_back(pt);
                inherited.push_back(0);
            }
            tracker.ingest(state.evaluated, before, state, inherited);
        }

        const double v_new = q.dot(*state.theta_star);
        const EvalPoint& star_pt = tracker.star(state.evaluated);
        out.last_report = check_convergence(state.iter, q_theta_mstep, v_new, v_prev,
                                            state.internal_feasible_found, ceiling,
                                            star_pt.max_violation, opts);
        if (out.last_report.converged && !state.theta_star_is_fallback) {
            out.converged = true;
            ++state.iter;
            break;
        }

        // contraction counter update
        state.counter = update_contraction_counter(state.counter, v_new, v_prev, ceiling);
        out.counter_trace.push_back(state.counter);
        v_prev = v_new;
    }

    const EvalPoint& star = tracker.star(state.evaluated);
    out.theta_hat = star.theta;
    out.optbound = q.dot(star.theta);
    out.c_at_opt = star.c_hat;
    out.cv_at_opt = star.constraint_violation;
    out.iterations = std::min(state.iter, opts.eam_maxit);
    out.evaluated = std::move(state.evaluated);
    if (state.theta_star_is_fallback) out.converged = false;
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return out;
}

RunResult run_interval(const Problem& problem) {
    const auto t_begin = std::chrono::steady_clock::now();
    const Options& opts = problem.opts;

    EmpiricalMoments em = compute_empirical(problem.data, *problem.model, opts);
    BootstrapEnsemble boot =
        bootstrap_ensemble(problem.data, *problem.model, em, opts, opts.seed, opts.parallel);

    EamContext ctx;
    ctx.problem = &problem;
    ctx.moments = &em;
    ctx.boot = &boot;

    std::vector<VectorXd> feas = problem.theta_feas;
    std::vector<EvalPoint> warm;
    if (feas.empty()) {
        RngStream rng_fs(opts.seed, RngDomain::feasible_starts, 0);
        FeasibleSearchResult direct = feasible_search_direct(ctx, rng_fs);
        feas = direct.feasible;
        warm = direct.evaluated;
        double best_minmax = direct.best_minmax;
        if (feas.empty()) {
            RngStream rng_fs2(opts.seed, RngDomain::feasible_starts, 1);
            FeasibleSearchResult eam_fs = feasible_search_eam(ctx, rng_fs2);
            feas = eam_fs.feasible;
            warm.insert(warm.end(), eam_fs.evaluated.begin(), eam_fs.evaluated.end());
            best_minmax = std::min(best_minmax, eam_fs.best_minmax);
            if (feas.empty()) {
                char buf[128];
                std::snprintf(buf, sizeof(buf),
                              "no feasible point found; best min-max value %.6g", best_minmax);
                throw std::runtime_error(buf);
            }
        }
    }

    RunResult result;
    result.opts = opts;
    result.seed = opts.seed;
    result.two_sided = opts.interval_type == IntervalType::two_sided;

    {
        RngStream rng_up(opts.seed, RngDomain::eam_init, 0);
        result.dir_up = run_eam(ctx, problem.p, feas, warm, rng_up);
        result.upper = result.dir_up.optbound;
    }
    if (result.two_sided) {
        RngStream rng_down(opts.seed, RngDomain::eam_init, 1);
        result.dir_down = run_eam(ctx, VectorXd(-problem.p), feas, warm, rng_down);
        result.lower = -result.dir_down->optbound;
    } else {
        result.lower = -kInf;
    }
    result.converged =
        result.dir_up.converged && (!result.two_sided || result.dir_down->converged);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return result;
}

} // namespace cpi
