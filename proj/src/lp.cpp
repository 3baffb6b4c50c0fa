#include "cpi/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cpi {

namespace {

// Dense tableau simplex for: min t  s.t.  A(u - v) - t*1 <= b,  (u, v, t) >= 0.
// The auxiliary t bounds the largest (row-normalized) constraint violation,
// so the system is feasible iff the optimum is <= feas_tol. Entering rule is
// Dantzig, switching to Bland after a degenerate-pivot streak.
struct PhaseOneTableau {
    int m = 0;           // constraint rows kept
    int n = 0;           // structural columns: 2d + 1
    int width = 0;       // n + m + 1 (slacks + rhs)
    std::vector<double> t;
    std::vector<int> basis;

    double& at(int i, int j) { return t[static_cast<std::size_t>(i) * width + j]; }
};

thread_local PhaseOneTableau tls_tab;

void pivot(PhaseOneTableau& tab, int row, int col) {
    const int rows = tab.m + 1;
    double* pr = &tab.at(row, 0);
    const double inv = 1.0 / pr[col];
    for (int j = 0; j < tab.width; ++j) pr[j] *= inv;
    pr[col] = 1.0;  // clean up roundoff on the pivot itself
    for (int i = 0; i < rows; ++i) {
        if (i == row) continue;
        double* ri = &tab.at(i, 0);
        const double f = ri[col];
        if (f == 0.0) continue;
        for (int j = 0; j < tab.width; ++j) ri[j] -= f * pr[j];
        ri[col] = 0.0;
    }
    tab.basis[row] = col;
}

} // namespace

PhaseOneResult phase_one(const LinearSystem& sys, double feas_tol) {
    const int m_in = sys.rows();
    const int d = sys.cols();
    PhaseOneResult res;
    res.point = VectorXd::Zero(d);

    // Rows are normalized to unit inf-norm so the verdict is invariant to
    // positive row rescaling and feas_tol acts uniformly.
    std::vector<int> live;
    std::vector<double> scale;
    live.reserve(m_in);
    bool all_nonneg = true;
    for (int i = 0; i < m_in; ++i) {
        const double s = sys.a.row(i).cwiseAbs().maxCoeff();
        if (s <= 0.0) {
            if (sys.b(i) < -feas_tol) {
                res.feasible = false;
                res.max_violation = -sys.b(i);
                return res;
            }
            continue;  // vacuous row
        }
        live.push_back(i);
        scale.push_back(s);
        if (sys.b(i) < 0.0) all_nonneg = false;
    }
    if (live.empty() || all_nonneg) {
        res.feasible = true;
        res.max_violation = 0.0;
        return res;
    }

    const int m = static_cast<int>(live.size());
    const int n = 2 * d + 1;
    const int t_col = 2 * d;
    PhaseOneTableau& tab = tls_tab;
    tab.m = m;
    tab.n = n;
    tab.width = n + m + 1;
    tab.t.assign(static_cast<std::size_t>(m + 1) * tab.width, 0.0);
    tab.basis.assign(m, 0);

    int init_row = 0;
    double init_val = kInf;
    for (int i = 0; i < m; ++i) {
        const int src = live[i];
        const double inv_s = 1.0 / scale[i];
        for (int k = 0; k < d; ++k) {
            const double a = sys.a(src, k) * inv_s;
            tab.at(i, k) = a;
            tab.at(i, d + k) = -a;
        }
        tab.at(i, t_col) = -1.0 * inv_s;
        tab.at(i, n + i) = 1.0;
        tab.at(i, n + m) = sys.b(src) * inv_s;
        tab.basis[i] = n + i;
        if (sys.b(src) < init_val) {
            init_val = sys.b(src);
            init_row = i;
        }
    }
    // Objective row: min t.
    tab.at(m, t_col) = 1.0;

    // One pivot on the t column restores primal feasibility (the row with the
    // most negative original-scale rhs).
    pivot(tab, init_row, t_col);

    const int max_pivots = 200 + 20 * (m + n);
    const double cost_tol = 1e-9;
    const double pivot_tol = 1e-11;
    int degenerate_streak = 0;
    bool bland = false;
    double prev_obj = tab.at(m, n + m);

    for (int it = 0; it < max_pivots; ++it) {
        // entering column
        int col = -1;
        double best = -cost_tol;
        for (int j = 0; j < n + m; ++j) {
            const double c = tab.at(m, j);
            if (c < best) {
                col = j;
                if (bland) break;
                best = c;
            } else if (bland && c < -cost_tol && col == -1) {
                col = j;
                break;
            }
        }
        if (col == -1) break;  // optimal

        // ratio test
        int row = -1;
        double best_ratio = kInf;
        for (int i = 0; i < m; ++i) {
            const double y = tab.at(i, col);
            if (y <= pivot_tol) continue;
            const double ratio = tab.at(i, n + m) / y;
            if (ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 && (row == -1 || tab.basis[i] < tab.basis[row]))) {
                best_ratio = ratio;
                row = i;
            }
        }
        if (row == -1)
            throw std::runtime_error("lp solver stalled: unbounded phase-one column");
        pivot(tab, row, col);

        const double obj = tab.at(m, n + m);
        if (std::fabs(obj - prev_obj) <= 1e-12) {
            if (++degenerate_streak >= 12) bland = true;
        } else {
            degenerate_streak = 0;
            bland = false;
        }
        prev_obj = obj;
        if (it + 1 == max_pivots)
            throw std::runtime_error("lp solver stalled: pivot cap reached");
    }

    // Recover t and lambda = u - v from the basic solution.
    double t_val = 0.0;
    VectorXd uv = VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        if (tab.basis[i] < n) uv(tab.basis[i]) = tab.at(i, n + m);
    }
    t_val = uv(t_col);
    res.max_violation = std::max(0.0, t_val);
    res.feasible = t_val <= feas_tol;
    for (int k = 0; k < d; ++k) res.point(k) = uv(k) - uv(d + k);
    return res;
}

bool is_feasible(const LinearSystem& sys, double feas_tol) {
    return phase_one(sys, feas_tol).feasible;
}

double max_linear_over_space(const ParameterSpace& space, const VectorXd& q) {
    const int d = space.dim();
    double box_max = 0.0;
    for (int k = 0; k < d; ++k) box_max += q(k) >= 0.0 ? q(k) * space.ub(k) : q(k) * space.lb(k);
    if (space.poly_rows() == 0) return box_max;

    const int s = space.poly_rows();
    LinearSystem sys;
    sys.a.resize(2 * d + s + 1, d);
    sys.b.resize(2 * d + s + 1);
    for (int k = 0; k < d; ++k) {
        sys.a.row(k).setZero();
        sys.a(k, k) = 1.0;
        sys.b(k) = space.ub(k);
        sys.a.row(d + k).setZero();
        sys.a(d + k, k) = -1.0;
        sys.b(d + k) = -space.lb(k);
    }
    sys.a.block(2 * d, 0, s, d) = space.poly_a;
    sys.b.segment(2 * d, s) = space.poly_b;
    sys.a.row(2 * d + s) = -q.transpose();

    // Bisection on the achievable level set of q'theta.
    double lo = -kInf;
    {
        sys.b(2 * d + s) = kInf;  // placeholder; test plain membership first
        LinearSystem base{sys.a.topRows(2 * d + s), sys.b.head(2 * d + s)};
        PhaseOneResult r = phase_one(base);
        if (!r.feasible) throw std::invalid_argument("parameter space is empty");
        lo = q.dot(r.point);
    }
    double hi = box_max;
    const double tol = 1e-10 * std::max(1.0, std::fabs(hi) + std::fabs(lo));
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        sys.b(2 * d + s) = -mid;
        if (is_feasible(sys))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

LinearSystem LambdaAssembly::at(double c, const VectorXd& g_row) const {
    LinearSystem sys;
    sys.a = rows;
    sys.b = rhs_base;
    for (int i = 0; i < n_moment_rows; ++i) sys.b(i) += c - g_row(boot_col[i]);
    return sys;
}

LambdaAssembly prepare_lambda_assembly(const VectorXd& theta, const MatrixXd& gradient_rows,
                                       const std::vector<char>& keep_rows, const GmsShift& shift,
                                       const ParameterSpace& space, const VectorXd& p,
                                       double sqrt_n, double rho) {
    const int d = space.dim();
    const int stacked = static_cast<int>(gradient_rows.rows());
    const int j1 = shift.j1();
    const int s = space.poly_rows();

    int n_moment = 0;
    for (int j = 0; j < stacked; ++j) {
        if (!keep_rows[j]) continue;
        if (j < j1 && shift.deleted_ineq[j]) continue;
        ++n_moment;
    }

    LambdaAssembly out;
    const int m = n_moment + 2 * d + 2 + s;
    out.rows.resize(m, d);
    out.rhs_base.resize(m);
    out.boot_col.assign(m, -1);
    out.n_moment_rows = n_moment;

    int r = 0;
    for (int j = 0; j < stacked; ++j) {
        if (!keep_rows[j]) continue;
        if (j < j1 && shift.deleted_ineq[j]) continue;
        out.rows.row(r) = gradient_rows.row(j);
        out.rhs_base(r) = j < j1 ? -shift.shift_ineq(j) : 0.0;
        out.boot_col[r] = j;
        ++r;
    }
    // lambda in sqrt(n)(Theta - theta) merged with the rho box, tightest pair
    // per coordinate.
    for (int k = 0; k < d; ++k) {
        out.rows.row(r).setZero();
        out.rows(r, k) = 1.0;
        out.rhs_base(r) = std::min(sqrt_n * (space.ub(k) - theta(k)), rho);
        ++r;
        out.rows.row(r).setZero();
        out.rows(r, k) = -1.0;
        out.rhs_base(r) = std::min(sqrt_n * (theta(k) - space.lb(k)), rho);
        ++r;
    }
    // p'lambda = 0 as two inequalities.
    out.rows.row(r) = p.transpose();
    out.rhs_base(r) = 0.0;
    ++r;
    out.rows.row(r) = -p.transpose();
    out.rhs_base(r) = 0.0;
    ++r;
    if (s > 0) {
        out.rows.block(r, 0, s, d) = space.poly_a;
        out.rhs_base.segment(r, s) = sqrt_n * (space.poly_b - space.poly_a * theta);
    }
    return out;
}

LinearSystem assemble_lambda_system(const VectorXd& theta, double c, const VectorXd& boot_row,
                                    const MatrixXd& gradient_rows, const std::vector<char>& keep_rows,
                                    const GmsShift& shift, const ParameterSpace& space,
                                    const VectorXd& p, double sqrt_n, double rho) {
    return prepare_lambda_assembly(theta, gradient_rows, keep_rows, shift, space, p, sqrt_n, rho)
        .at(c, boot_row);
}

} // namespace cpi
