#include "cpi/surrogate.hpp"

#include <cmath>
#include <stdexcept>

namespace cpi {

namespace {

constexpr double kLengthLo = 1e-2;
constexpr double kLengthHi = 1e2;
constexpr double kNuggetStart = 1e-12;
constexpr double kNuggetCap = 1e-4;

struct FitEval {
    bool ok = false;
    bool interpolates = false;    // design-point error within the contract
    double log_psi = kInf;        // log(zeta^2) + log det(C) / L, minimized
    double nugget = 0.0;
    double trend = 0.0;
    double process_var = 0.0;
    Eigen::LLT<MatrixXd> chol;
};

MatrixXd correlation(const MatrixXd& x, const VectorXd& len) {
    const int l = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    MatrixXd r(l, l);
    for (int i = 0; i < l; ++i) {
        r(i, i) = 1.0;
        for (int j = i + 1; j < l; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double h = (x(i, k) - x(j, k)) / len(k);
                s += h * h;
            }
            r(i, j) = r(j, i) = std::exp(-s);
        }
    }
    return r;
}

// GLS trend/variance at a given correlation length, escalating the nugget
// until the Cholesky factorization goes through. Among factorizable nugget
// levels, prefer one whose design-point reproduction error stays within the
// interpolation contract (the error at design row i is nugget * |w_i|).
FitEval evaluate(const MatrixXd& x, const VectorXd& y, const VectorXd& len) {
    const int l = static_cast<int>(x.rows());
    const MatrixXd r = correlation(x, len);
    FitEval ev;
    for (double nug = kNuggetStart; nug <= kNuggetCap * 1.0000001; nug *= 10.0) {
        MatrixXd c = r;
        c.diagonal().array() += nug;
        Eigen::LLT<MatrixXd> llt(c);
        if (llt.info() != Eigen::Success) continue;
        // reject factorizations with non-positive or wildly tiny pivots
        const double min_diag = llt.matrixLLT().diagonal().minCoeff();
        if (!(min_diag > 1e-12)) continue;

        const VectorXd ones = VectorXd::Ones(l);
        const VectorXd ci_ones = llt.solve(ones);
        const double s = ones.dot(ci_ones);
        const double mu = y.dot(ci_ones) / s;
        const VectorXd resid = y.array() - mu;
        const VectorXd ci_resid = llt.solve(resid);
        const double var = std::max(0.0, resid.dot(ci_resid) / l);

        bool interpolates = true;
        for (int i = 0; i < l; ++i)
            if (nug * std::fabs(ci_resid(i)) > 0.5 * (10.0 * nug * std::fabs(y(i)) + 1e-8))
                interpolates = false;

        if (ev.ok && !interpolates) continue;

        double log_det = 0.0;
        for (int i = 0; i < l; ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));

        ev.ok = true;
        ev.interpolates = interpolates;
        ev.nugget = nug;
        ev.trend = mu;
        ev.process_var = var;
        ev.log_psi = std::log(std::max(var, 1e-300)) + log_det / l;
        ev.chol = std::move(llt);
        if (interpolates) return ev;
    }
    return ev;
}

} // namespace

KrigingSurrogate KrigingSurrogate::fit(const MatrixXd& design, const VectorXd& responses) {
    const int l = static_cast<int>(design.rows());
    const int d = static_cast<int>(design.cols());
    if (l < d + 1) throw std::invalid_argument("kriging needs at least d + 1 design points");
    if (responses.size() != l) throw std::invalid_argument("design/response size mismatch");

    KrigingSurrogate m;
    m.lo_ = design.colwise().minCoeff();
    const VectorXd hi = design.colwise().maxCoeff();
    m.scale_ = (hi - m.lo_).cwiseMax(1e-300);
    for (int k = 0; k < d; ++k)
        if (hi(k) == m.lo_(k)) m.scale_(k) = 1.0;
    const MatrixXd normalized = (design.rowwise() - m.lo_.transpose()).array().rowwise() /
                                m.scale_.transpose().array();

    for (int i = 0; i < l; ++i)
        for (int j = i + 1; j < l; ++j)
            if ((normalized.row(i) - normalized.row(j)).norm() < 1e-14)
                throw std::invalid_argument("duplicated design rows passed to kriging fit");

    // Points closer than the merge radius in normalized coordinates cannot be
    // told apart at correlation lengths within the search box; keeping them
    // separate only destroys the conditioning of the correlation matrix. The
    // radius escalates until the fitted model reproduces its design within
    // the interpolation contract (near-lattice chains of evaluation points
    // can defeat the smaller radii).
    int lk = 0;
    std::vector<int> rows;
    auto select_rows = [&](double merge_radius) {
        rows.clear();
        for (int i = 0; i < l; ++i) {
            bool merged = false;
            for (int j : rows)
                if ((normalized.row(i) - normalized.row(j)).norm() < merge_radius) merged = true;
            if (!merged) rows.push_back(i);
        }
        lk = static_cast<int>(rows.size());
        m.design_.resize(lk, d);
        m.design_original_.resize(lk, d);
        m.responses_.resize(lk);
        for (int i = 0; i < lk; ++i) {
            m.design_.row(i) = normalized.row(rows[i]);
            m.design_original_.row(i) = design.row(rows[i]);
            m.responses_(i) = responses(rows[i]);
        }
    };
    // Common-length log grid, then one golden-section refinement per
    // coordinate. Non-interpolating fits carry a large penalty so the search
    // only settles on one when nothing better factorizes.
    auto score = [](const FitEval& ev) {
        return ev.ok ? ev.log_psi + (ev.interpolates ? 0.0 : 1e6) : kInf;
    };
    auto run_search = [&](VectorXd& len_final) {
        const int grid_n = 13;
        double best_log_len = 0.0;
        FitEval best;
        for (int g = 0; g < grid_n; ++g) {
            const double t = static_cast<double>(g) / (grid_n - 1);
            const double log_len =
                std::log(kLengthLo) + t * (std::log(kLengthHi) - std::log(kLengthLo));
            const VectorXd len = VectorXd::Constant(d, std::exp(log_len));
            FitEval ev = evaluate(m.design_, m.responses_, len);
            if (score(ev) < score(best)) {
                best = std::move(ev);
                best_log_len = log_len;
            }
        }
        if (!best.ok) throw std::runtime_error("design degenerate: kriging factorization failed");

        VectorXd log_len = VectorXd::Constant(d, best_log_len);
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int k = 0; k < d; ++k) {
            double a = std::log(kLengthLo), b = std::log(kLengthHi);
            auto eval_at = [&](double v) {
                VectorXd ll = log_len;
                ll(k) = v;
                return score(evaluate(m.design_, m.responses_, ll.array().exp().matrix()));
            };
            double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
            double f1 = eval_at(x1), f2 = eval_at(x2);
            for (int it = 0; it < 16; ++it) {
                if (f1 <= f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    f1 = eval_at(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    f2 = eval_at(x2);
                }
            }
            const double cand = f1 <= f2 ? x1 : x2;
            const double cand_val = std::min(f1, f2);
            const FitEval cur = evaluate(m.design_, m.responses_,
                                         log_len.array().exp().matrix());
            if (cand_val < score(cur)) log_len(k) = cand;
        }

        len_final = log_len.array().exp().matrix();
        FitEval fin = evaluate(m.design_, m.responses_, len_final);
        if (!fin.ok) {
            len_final = VectorXd::Constant(d, std::exp(best_log_len));
            fin = std::move(best);
        }
        return fin;
    };

    FitEval fin;
    VectorXd len_final;
    double used_radius = 3e-4;
    select_rows(used_radius);
    if (lk < d + 1)
        throw std::invalid_argument("kriging needs at least d + 1 separated design points");
    fin = run_search(len_final);
    for (const double radius : {1e-3, 3e-3, 1e-2}) {
        if (fin.interpolates) break;
        select_rows(radius);
        if (lk < d + 1) {
            select_rows(used_radius);   // keep the widest usable selection
            break;
        }
        fin = run_search(len_final);
        used_radius = radius;
    }
    m.corr_length_ = len_final;
    m.trend_ = fin.trend;
    m.process_var_ = fin.process_var;
    m.nugget_ = fin.nugget;
    m.chol_ = std::move(fin.chol);

    const VectorXd resid = m.responses_.array() - m.trend_;
    m.weights_ = m.chol_.solve(resid);
    m.cinv_ones_ = m.chol_.solve(VectorXd::Ones(lk));
    m.ones_cinv_ones_ = m.cinv_ones_.sum();
    const MatrixXd linv = m.chol_.matrixL().solve(MatrixXd::Identity(lk, lk));
    m.cinv_diag_ = linv.colwise().squaredNorm().transpose();
    return m;
}

KrigingPrediction KrigingSurrogate::predict(const VectorXd& theta) const {
    const int l = static_cast<int>(design_.rows());
    const int d = static_cast<int>(design_.cols());
    const VectorXd x = (theta - lo_).cwiseQuotient(scale_);

    VectorXd r(l);
    int nearest = 0;
    double nearest_dist2 = kInf;
    for (int i = 0; i < l; ++i) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            const double h = (x(k) - design_(i, k)) / corr_length_(k);
            s += h * h;
        }
        r(i) = std::exp(-s);
        if (s < nearest_dist2) {
            nearest_dist2 = s;
            nearest = i;
        }
    }

    KrigingPrediction out;
    out.value = trend_ + r.dot(weights_);

    // dr_i/dtheta_k = r_i * (-2 (x_k - X_ik) / len_k^2) / scale_k
    MatrixXd dr(l, d);
    for (int i = 0; i < l; ++i)
        for (int k = 0; k < d; ++k)
            dr(i, k) = r(i) * (-2.0 * (x(k) - design_(i, k)) /
                               (corr_length_(k) * corr_length_(k) * scale_(k)));
    out.gradient = dr.transpose() * weights_;

    const VectorXd ci_r = chol_.solve(r);
    // At a design row, 1 - r'C^{-1}r equals nugget - nugget^2 (C^{-1})_ii
    // exactly; the direct form avoids the cancellation against 1.
    const double q_general = 1.0 - r.dot(ci_r);
    const double q = nearest_dist2 < 1e-16
                         ? nugget_ - nugget_ * nugget_ * cinv_diag_(nearest)
                         : q_general;
    const double mse = process_var_ * q;
    out.sd = std::sqrt(std::max(0.0, mse));

    const VectorXd dmse = dr.transpose() * (-2.0 * process_var_ * ci_r);
    out.sd_gradient = dmse / (2.0 * std::max(out.sd, kSdFloor));
    return out;
}

} // namespace cpi
