#include "cpi/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "cpi/parallel.hpp"

namespace cpi {

int EmpiricalMoments::kept_rows() const {
    int k = 0;
    for (char c : keep_ineq) k += c != 0;
    for (char c : keep_eq) k += c != 0;
    return k;
}

std::vector<char> EmpiricalMoments::keep_stacked() const {
    std::vector<char> out(keep_ineq);
    out.insert(out.end(), keep_eq.begin(), keep_eq.end());
    return out;
}

VectorXd EmpiricalMoments::sigma_stacked() const {
    VectorXd out(sigma_ineq.size() + sigma_eq.size());
    out << sigma_ineq, sigma_eq;
    return out;
}

VectorXd EmpiricalMoments::f_stacked() const {
    VectorXd out(f_ineq.size() + f_eq.size());
    out << f_ineq, f_eq;
    return out;
}

VectorXd BootstrapEnsemble::stacked_row(int b_index) const {
    VectorXd out(g_ineq.cols() + g_eq.cols());
    out << g_ineq.row(b_index).transpose(), g_eq.row(b_index).transpose();
    return out;
}

namespace {

void check_finite(const VectorXd& v, const char* what) {
    for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(v(i)))
            throw std::runtime_error(std::string("model returned non-finite ") + what);
}

void check_doubling(const VectorXd& f_eq, int j2, const char* what) {
    for (int k = 0; k < j2; ++k)
        if (std::fabs(f_eq(j2 + k) + f_eq(k)) > 1e-10 * (1.0 + std::fabs(f_eq(k))))
            throw std::runtime_error(std::string(what) +
                                     ": equality block violates the doubling convention");
}

} // namespace

EmpiricalMoments compute_empirical(const MatrixXd& data, const MomentModel& model,
                                   const Options& opts) {
    (void)opts;
    if (data.rows() < 2) throw std::invalid_argument("need at least 2 observations");
    const MomentCounts counts = model.counts();
    counts.validate();

    EmpiricalMoments em;
    em.counts = counts;
    em.n = static_cast<int>(data.rows());

    FhatResult f = model.f_hat(data);
    check_finite(f.f_ineq, "f_ineq");
    check_finite(f.f_eq, "f_eq");
    check_doubling(f.f_eq, counts.j2, "f_eq");

    em.f_ineq = std::move(f.f_ineq);
    em.f_eq = std::move(f.f_eq);
    em.keep_ineq = std::move(f.keep_ineq);
    em.keep_eq = std::move(f.keep_eq);
    em.paired = std::move(f.paired);

    model.sigma_hat(data, em.f_ineq, em.f_eq, em.sigma_ineq, em.sigma_eq);
    check_finite(em.sigma_ineq, "sigma_ineq");
    check_finite(em.sigma_eq, "sigma_eq");

    for (int j = 0; j < counts.j1; ++j) {
        if (!em.keep_ineq[j])
            em.sigma_ineq(j) = 1.0;  // inert placeholder
        else if (em.sigma_ineq(j) <= 0.0)
            throw std::runtime_error("zero standard deviation on a kept inequality moment");
    }
    for (int j = 0; j < 2 * counts.j2; ++j) {
        if (!em.keep_eq[j])
            em.sigma_eq(j) = 1.0;
        else if (em.sigma_eq(j) <= 0.0)
            throw std::runtime_error("zero standard deviation on a kept equality moment");
    }
    for (int k = 0; k < counts.j2; ++k) {
        if (em.keep_eq[k] && em.keep_eq[counts.j2 + k] &&
            std::fabs(em.sigma_eq(k) - em.sigma_eq(counts.j2 + k)) >
                1e-10 * (1.0 + em.sigma_eq(k)))
            throw std::runtime_error("equality pair has asymmetric standard deviations");
    }
    return em;
}

VectorXd bootstrap_row(const MatrixXd& data, const MomentModel& model,
                       const EmpiricalMoments& moments, const std::vector<int>& indices) {
    const MomentCounts counts = moments.counts;
    const double root_n = std::sqrt(static_cast<double>(moments.n));
    MatrixXd resample(static_cast<int>(indices.size()), data.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        resample.row(static_cast<int>(i)) = data.row(indices[i]);
    const FhatResult fb = model.f_hat(resample);

    VectorXd out = VectorXd::Zero(counts.total_rows());
    for (int j = 0; j < counts.j1; ++j) {
        if (!moments.keep_ineq[j]) continue;
        out(j) = root_n * (fb.f_ineq(j) - moments.f_ineq(j)) / moments.sigma_ineq(j);
    }
    // Equality rows are mirrored from the first half so antisymmetry holds
    // exactly (sigma symmetry is validated in compute_empirical).
    for (int k = 0; k < counts.j2; ++k) {
        if (!moments.keep_eq[k]) continue;
        const double val = root_n * (fb.f_eq(k) - moments.f_eq(k)) / moments.sigma_eq(k);
        out(counts.j1 + k) = val;
        if (moments.keep_eq[counts.j2 + k]) out(counts.j1 + counts.j2 + k) = -val;
    }
    return out;
}

BootstrapEnsemble bootstrap_ensemble(const MatrixXd& data, const MomentModel& model,
                                     const EmpiricalMoments& moments, const Options& opts,
                                     std::uint64_t seed, int workers) {
    const int n = static_cast<int>(data.rows());
    if (n < 2) throw std::invalid_argument("resampling degenerate: n < 2");
    const int b_total = opts.b;
    const MomentCounts counts = moments.counts;

    BootstrapEnsemble boot;
    boot.g_ineq.setZero(b_total, counts.j1);
    boot.g_eq.setZero(b_total, 2 * counts.j2);

    // Row-index multinomial resampling; stream depends only on (seed, b) so
    // the worker count cannot alter the draws.
    parallel_for(static_cast<std::size_t>(b_total), workers, [&](std::size_t bi) {
        RngStream rng(seed, RngDomain::bootstrap, bi);
        std::vector<int> indices(n);
        for (int i = 0; i < n; ++i) indices[i] = static_cast<int>(rng.uniform_index(n));
        const VectorXd row = bootstrap_row(data, model, moments, indices);
        boot.g_ineq.row(bi) = row.head(counts.j1).transpose();
        boot.g_eq.row(bi) = row.tail(2 * counts.j2).transpose();
    });
    return boot;
}

GmsShift gms_shift(const VectorXd& theta, const EmpiricalMoments& moments,
                   const MomentModel& model, const Options& opts) {
    const MomentCounts counts = moments.counts;
    VectorXd g_ineq, g_eq;
    model.g(theta, g_ineq, g_eq);
    check_finite(g_ineq, "g_ineq");

    const double n = static_cast<double>(moments.n);
    const double kappa = opts.kappa_value(n);
    const double root_n = std::sqrt(n);

    GmsShift shift;
    shift.shift_ineq.setZero(counts.j1);
    shift.deleted_ineq.assign(counts.j1, 0);
    for (int j = 0; j < counts.j1; ++j) {
        if (!moments.keep_ineq[j]) continue;
        const double xi = root_n * (moments.f_ineq(j) + g_ineq(j)) / (moments.sigma_ineq(j) * kappa);
        const double phi = opts.gms_value(xi);
        if (std::isinf(phi) && phi < 0.0)
            shift.deleted_ineq[j] = 1;
        else
            shift.shift_ineq(j) = phi;
    }
    return shift;
}

VectorXd studentized_moments(const VectorXd& theta, const EmpiricalMoments& moments,
                             const MomentModel& model) {
    const MomentCounts counts = moments.counts;
    VectorXd g_ineq, g_eq;
    model.g(theta, g_ineq, g_eq);
    check_finite(g_ineq, "g_ineq");
    check_finite(g_eq, "g_eq");
    const double root_n = std::sqrt(static_cast<double>(moments.n));

    VectorXd out(counts.total_rows());
    for (int j = 0; j < counts.j1; ++j)
        out(j) = moments.keep_ineq[j]
                     ? root_n * (moments.f_ineq(j) + g_ineq(j)) / moments.sigma_ineq(j)
                     : -kInf;
    for (int j = 0; j < 2 * counts.j2; ++j)
        out(counts.j1 + j) = moments.keep_eq[j]
                                 ? root_n * (moments.f_eq(j) + g_eq(j)) / moments.sigma_eq(j)
                                 : -kInf;
    return out;
}

} // namespace cpi
