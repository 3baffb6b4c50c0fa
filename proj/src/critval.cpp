#include "cpi/critval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "cpi/parallel.hpp"

namespace cpi {

double bonferroni_bound(double alpha, int j_kept) {
    if (j_kept <= 0) return 0.0;
    if (alpha <= 0.0) return kInf;
    return normal_quantile(1.0 - alpha / j_kept);
}

namespace {

struct PsiEvaluator {
    const LambdaAssembly& assembly;
    const BootstrapEnsemble& boot;
    PsiCache* cache;      // may be null (cache disabled)
    std::atomic<long>& lp_count;
    int workers;

    // Psi_alpha(c) + (1 - alpha) = fraction of feasible bootstrap systems.
    double fraction_feasible(double c) {
        const int b_total = boot.b();
        std::vector<char> feas(b_total, 0);
        parallel_for(static_cast<std::size_t>(b_total), workers, [&](std::size_t bi) {
            const int b = static_cast<int>(bi);
            if (cache) {
                if (c >= cache->feasible_at[b]) {
                    feas[b] = 1;
                    return;
                }
                if (c <= cache->infeasible_at[b]) {
                    feas[b] = 0;
                    return;
                }
            }
            const VectorXd g_row = boot.stacked_row(b);
            const LinearSystem sys = assembly.at(c, g_row);
            const bool ok = is_feasible(sys);
            lp_count.fetch_add(1, std::memory_order_relaxed);
            feas[b] = ok ? 1 : 0;
            if (cache) {
                // feasibility is monotone in c; a contradictory record means
                // the LP verdicts themselves are inconsistent
                if (ok) {
                    if (c < cache->infeasible_at[b])
                        throw std::runtime_error("psi cache: monotonicity violated");
                    cache->feasible_at[b] = std::min(cache->feasible_at[b], c);
                } else {
                    if (c > cache->feasible_at[b])
                        throw std::runtime_error("psi cache: monotonicity violated");
                    cache->infeasible_at[b] = std::max(cache->infeasible_at[b], c);
                }
            }
        });
        long n_feas = 0;
        for (char f : feas) n_feas += f;
        return static_cast<double>(n_feas) / b_total;
    }
};

} // namespace

CritvalResult calibrated_critval(const VectorXd& theta, const CritvalContext& ctx) {
    const Options& opts = *ctx.opts;
    const EmpiricalMoments& em = *ctx.moments;
    const double alpha = opts.alpha;

    MatrixXd dg_ineq, dg_eq;
    ctx.model->g_gradient(theta, dg_ineq, dg_eq);
    MatrixXd grad(dg_ineq.rows() + dg_eq.rows(), dg_ineq.cols());
    grad << dg_ineq, dg_eq;

    const GmsShift shift = gms_shift(theta, em, *ctx.model, opts);
    const std::vector<char> keep = em.keep_stacked();
    const LambdaAssembly assembly = prepare_lambda_assembly(
        theta, grad, keep, shift, *ctx.space, ctx.p, ctx.sqrt_n, opts.rho);

    std::atomic<long> lp_count{0};
    std::optional<PsiCache> cache;
    if (ctx.use_cache) cache.emplace(ctx.boot->b());
    PsiEvaluator psi{assembly, *ctx.boot, cache ? &*cache : nullptr, lp_count, ctx.workers};

    const double target = 1.0 - alpha;
    auto psi_alpha = [&](double c) { return psi.fraction_feasible(c) - target; };

    // Step 0: bracket. The Bonferroni bound can be capped by the level at
    // which lambda = 0 satisfies every bootstrap system, which is an upper
    // bracket by construction (and finite even at alpha = 0).
    const int j_kept = em.kept_rows();
    if (j_kept == 0 || assembly.n_moment_rows == 0)
        return {0.0, lp_count.load()};

    double zero_lambda_cap = 0.0;
    for (int b = 0; b < ctx.boot->b(); ++b) {
        const VectorXd row = ctx.boot->stacked_row(b);
        for (int r = 0; r < assembly.n_moment_rows; ++r)
            zero_lambda_cap =
                std::max(zero_lambda_cap, row(assembly.boot_col[r]) - assembly.rhs_base(r));
    }
    const double c_bar = std::min(bonferroni_bound(alpha, j_kept), zero_lambda_cap);

    double c_lo = 0.0;
    double psi_lo = psi_alpha(0.0);
    if (psi_lo >= 0.0) return {0.0, lp_count.load()};

    double c_hi = c_bar;
    double psi_hi = psi_alpha(c_hi);
    if (psi_hi < 0.0) {
        // The Bonferroni bound is asymptotic; in a finite bootstrap sample the
        // zero-lambda cap is the bracket that always works (every system is
        // feasible at lambda = 0 there, so Psi = alpha >= 0).
        if (c_hi < zero_lambda_cap) {
            c_hi = zero_lambda_cap;
            psi_hi = psi_alpha(c_hi);
        }
        if (psi_hi < 0.0)
            throw std::runtime_error("critical value bracket failed: Psi(cbar) < 0");
    }

    // Brent-Dekker iteration: inverse quadratic interpolation when the three
    // retained points are usable, else secant, else bisection. Bisection is
    // forced when a proposal leaves the open bracket, repeats a previous
    // proposal within 1e-12, or after two interpolated steps in a row (Psi is
    // a step function, so interpolation alone can stall).
    const double tol = kBdmTol;
    std::optional<double> c_third;  // replaced bracket end (unset on iteration 1)
    double psi_third = 0.0;
    double prev_proposal = kInf;
    int interp_streak = 0;

    while (psi_hi > tol && (c_hi - c_lo) > tol) {
        double c2 = kInf;
        bool interpolated = false;
        if (c_third.has_value()) {
            const double cm = *c_third;
            if (psi_third != psi_lo && psi_third != psi_hi && psi_lo != psi_hi &&
                cm != c_lo && cm != c_hi) {
                // inverse quadratic through (c_lo, psi_lo), (c_hi, psi_hi), (cm, psi_third)
                const double q0 = psi_lo, q1 = psi_hi, q2 = psi_third;
                c2 = c_lo * q1 * q2 / ((q0 - q1) * (q0 - q2)) +
                     c_hi * q0 * q2 / ((q1 - q0) * (q1 - q2)) +
                     cm * q0 * q1 / ((q2 - q0) * (q2 - q1));
                interpolated = true;
            } else if (psi_hi != psi_lo) {
                c2 = c_hi - psi_hi * (c_hi - c_lo) / (psi_hi - psi_lo);  // secant
                interpolated = true;
            }
        }
        const bool inside = c2 > c_lo && c2 < c_hi;
        if (!interpolated || !inside || std::fabs(c2 - prev_proposal) <= 1e-12 ||
            interp_streak >= 2) {
            c2 = 0.5 * (c_lo + c_hi);
            interp_streak = 0;
        } else {
            ++interp_streak;
        }
        prev_proposal = c2;

        const double psi2 = psi_alpha(c2);
        if (psi2 >= 0.0) {
            c_third = c_hi;
            psi_third = psi_hi;
            c_hi = c2;
            psi_hi = psi2;
        } else {
            c_third = c_lo;
            psi_third = psi_lo;
            c_lo = c2;
            psi_lo = psi2;
        }
    }
    // Psi_alpha(c_hi) >= 0 throughout, so coverage is at least 1 - alpha.
    return {c_hi, lp_count.load()};
}

double as_critval(const VectorXd& theta, const CritvalContext& ctx) {
    const EmpiricalMoments& em = *ctx.moments;
    const GmsShift shift = gms_shift(theta, em, *ctx.model, *ctx.opts);
    const std::vector<char> keep = em.keep_stacked();
    const int j1 = em.counts.j1;
    const int rows = em.counts.total_rows();
    const int b_total = ctx.boot->b();

    std::vector<double> maxdev;
    maxdev.reserve(b_total);
    for (int b = 0; b < b_total; ++b) {
        const VectorXd row = ctx.boot->stacked_row(b);
        double m = -kInf;
        for (int j = 0; j < rows; ++j) {
            if (!keep[j]) continue;
            if (j < j1 && shift.deleted_ineq[j]) continue;
            m = std::max(m, row(j));
        }
        maxdev.push_back(m);
    }
    if (maxdev.empty()) return 0.0;
    std::sort(maxdev.begin(), maxdev.end());
    const double q = 1.0 - ctx.opts->alpha;
    int idx = static_cast<int>(std::ceil(q * b_total)) - 1;
    idx = std::clamp(idx, 0, b_total - 1);
    return std::max(0.0, maxdev[static_cast<std::size_t>(idx)]);
}

CritvalResult critval(const VectorXd& theta, const CritvalContext& ctx) {
    if (ctx.opts->method == CiMethod::andrews_soares) return {as_critval(theta, ctx), 0};
    return calibrated_critval(theta, ctx);
}

} // namespace cpi
