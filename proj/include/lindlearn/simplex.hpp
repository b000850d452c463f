#pragma once

// Self-contained dense two-phase simplex solver for the small linear programs
// that back the robust-regression fits (l1 and l-infinity objectives recast
// with split variables).  Problem sizes stay in the low hundreds of rows and
// columns, so a textbook tableau with Dantzig pivoting (Bland fallback for
// anti-cycling) is plenty.

#include <Eigen/Dense>

namespace lindlearn {

struct LpSolution {
    Eigen::VectorXd x;       // optimal point, length = #structural variables
    double objective = 0.0;  // c.dot(x)
};

// Minimize c.dot(x) subject to A x <= b and x >= 0.
//
// Rows with negative b receive artificial variables and a phase-1 feasibility
// solve.  Throws Error(numerical) when the program is infeasible, unbounded,
// or the pivot count exceeds a generous cap (degenerate input).
LpSolution solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& c);

}  // namespace lindlearn
