#include "lindlearn/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "lindlearn/common.hpp"

namespace lindlearn {

namespace {

constexpr double kPivotTol = 1e-9;    // smallest usable pivot element
constexpr double kReducedTol = 1e-10; // reduced-cost optimality threshold
constexpr double kFeasTol = 1e-7;     // phase-1 objective must drop below this

// Tableau state shared by both phases.  Column layout:
//   [0, n_struct)              structural variables
//   [n_struct, n_struct+m)     slack variables (one per row)
//   [n_struct+m, n_total)      artificial variables (rows with b < 0 only)
struct Tableau {
    Eigen::MatrixXd rows;        // m x (n_total + 1); last column is the RHS
    Eigen::VectorXd reduced;     // length n_total + 1; last entry = -objective
    std::vector<int> basis;      // basis[i] = column basic in row i
    int n_struct = 0;
    int n_total = 0;
    int art_start = 0;           // first artificial column

    int m() const { return static_cast<int>(rows.rows()); }
    int rhs_col() const { return n_total; }
};

void pivot(Tableau& t, int row, int col) {
    t.rows.row(row) /= t.rows(row, col);
    for (int i = 0; i < t.m(); ++i) {
        if (i == row) continue;
        const double f = t.rows(i, col);
        if (f != 0.0) t.rows.row(i) -= f * t.rows.row(row);
    }
    const double f = t.reduced(col);
    if (f != 0.0) t.reduced -= f * t.rows.row(row).transpose();
    t.basis[static_cast<std::size_t>(row)] = col;
}

// Runs simplex iterations on the current reduced-cost row until optimality.
// `allow_artificial` keeps artificial columns eligible (phase 1 only).
void iterate(Tableau& t, bool allow_artificial) {
    const int limit = 50 * (t.m() + t.n_total) + 1000;
    const int bland_after = 5 * (t.m() + t.n_total);
    for (int iter = 0; iter < limit; ++iter) {
        const bool bland = iter > bland_after;
        const int n_cols = allow_artificial ? t.n_total : t.art_start;
        int enter = -1;
        double best = -kReducedTol;
        for (int j = 0; j < n_cols; ++j) {
            const double r = t.reduced(j);
            if (r < best) {
                enter = j;
                best = r;
                if (bland) break;  // first eligible column (Bland's rule)
            }
        }
        if (enter < 0) return;  // optimal

        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < t.m(); ++i) {
            const double a = t.rows(i, enter);
            if (a <= kPivotTol) continue;
            const double ratio = t.rows(i, t.rhs_col()) / a;
            if (ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 &&
                 (leave < 0 || t.basis[static_cast<std::size_t>(i)] <
                                   t.basis[static_cast<std::size_t>(leave)]))) {
                best_ratio = ratio;
                leave = i;
            }
        }
        if (leave < 0) fail_numerical("linear program is unbounded");
        pivot(t, leave, enter);
    }
    fail_numerical("simplex iteration limit exceeded (degenerate program)");
}

}  // namespace

LpSolution solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& c) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    if (b.size() != m || c.size() != n)
        fail_config("solve_lp: inconsistent dimensions");
    if (m == 0) {
        // No constraints: optimum is x = 0 unless some cost is negative.
        for (int j = 0; j < n; ++j)
            if (c(j) < -kReducedTol) fail_numerical("linear program is unbounded");
        return {Eigen::VectorXd::Zero(n), 0.0};
    }

    int n_art = 0;
    for (int i = 0; i < m; ++i)
        if (b(i) < 0.0) ++n_art;

    Tableau t;
    t.n_struct = n;
    t.art_start = n + m;
    t.n_total = n + m + n_art;
    t.rows = Eigen::MatrixXd::Zero(m, t.n_total + 1);
    t.basis.assign(static_cast<std::size_t>(m), -1);

    int art = t.art_start;
    for (int i = 0; i < m; ++i) {
        const double sign = b(i) < 0.0 ? -1.0 : 1.0;  // normalize RHS >= 0
        t.rows.block(i, 0, 1, n) = sign * A.row(i);
        t.rows(i, n + i) = sign;  // slack
        t.rows(i, t.rhs_col()) = sign * b(i);
        if (b(i) < 0.0) {
            t.rows(i, art) = 1.0;
            t.basis[static_cast<std::size_t>(i)] = art++;
        } else {
            t.basis[static_cast<std::size_t>(i)] = n + i;
        }
    }

    if (n_art > 0) {
        // Phase 1: minimize the sum of artificial variables.
        t.reduced = Eigen::VectorXd::Zero(t.n_total + 1);
        for (int j = t.art_start; j < t.n_total; ++j) t.reduced(j) = 1.0;
        for (int i = 0; i < m; ++i)
            if (t.basis[static_cast<std::size_t>(i)] >= t.art_start)
                t.reduced -= t.rows.row(i).transpose();
        iterate(t, true);
        if (-t.reduced(t.rhs_col()) > kFeasTol)
            fail_numerical("linear program is infeasible");
        // Drive leftover (degenerate) artificials out of the basis.
        for (int i = 0; i < m; ++i) {
            if (t.basis[static_cast<std::size_t>(i)] < t.art_start) continue;
            int col = -1;
            for (int j = 0; j < t.art_start; ++j) {
                if (std::abs(t.rows(i, j)) > kPivotTol) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) {
                pivot(t, i, col);
            } else {
                // Redundant row: zero it so it can never pivot again.
                t.rows.row(i).setZero();
                t.rows(i, t.basis[static_cast<std::size_t>(i)]) = 1.0;
            }
        }
    }

    // Phase 2: original objective, artificial columns frozen out.
    t.reduced = Eigen::VectorXd::Zero(t.n_total + 1);
    t.reduced.head(n) = c;
    for (int i = 0; i < m; ++i) {
        const int bi = t.basis[static_cast<std::size_t>(i)];
        if (bi < n && c(bi) != 0.0) t.reduced -= c(bi) * t.rows.row(i).transpose();
    }
    iterate(t, false);

    LpSolution sol;
    sol.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        const int bi = t.basis[static_cast<std::size_t>(i)];
        if (bi < n) sol.x(bi) = t.rows(i, t.rhs_col());
    }
    sol.objective = c.dot(sol.x);
    return sol;
}

}  // namespace lindlearn
