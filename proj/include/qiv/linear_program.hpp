#pragma once

#include "qiv/dataset.hpp"

namespace qiv {

struct LpOptions {
    /// Optimality / feasibility tolerance, relative to the problem scale.
    double tolerance = 1e-9;
    /// 0 selects 50 * (rows + columns).
    int max_iterations = 0;
};

struct LpSolution {
    Vector x;
    double objective = 0.0;
    int iterations = 0;
};

/// Solves  min cost'x  subject to  A x <= b,  x >= 0  with a two-phase
/// dense tableau simplex. Entries of b may have either sign.
///
/// Uses Dantzig pricing and falls back to Bland's rule after a run of
/// degenerate pivots. The final basic solution is recomputed from the
/// original data with an LU solve of the basis matrix.
///
/// Throws SolverDidNotConverge, InfeasibleProgram or UnboundedProgram.
LpSolution solve_lp(const Vector& cost, const Matrix& A, const Vector& b,
                    const LpOptions& options = {});

}  // namespace qiv
