#pragma once

#include "vdl/core.hpp"

namespace vdl {

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are
/// unused. No pivoting; every system assembled in this project is diagonally
/// dominant with Dirichlet closure.
Vec thomas_solve(const Vec& lower, const Vec& diag, const Vec& upper, const Vec& rhs);

struct SymmetricEigen {
    Vec values;      // descending
    Matrix vectors;  // columns, matching values
};

/// Cyclic Jacobi rotations for a symmetric matrix. Adequate for the d <= 30
/// problems here; not a general-purpose eigensolver.
SymmetricEigen symmetric_eigen(const Matrix& a, int max_sweeps = 64);

/// Lower-triangular Cholesky factor of an SPD matrix. Throws on a
/// non-positive pivot.
Matrix cholesky_lower(const Matrix& a);

/// Solve L x = b (forward) and L^T x = b (backward) for triangular L.
Vec forward_substitute(const Matrix& lower, const Vec& b);
Vec backward_substitute_transposed(const Matrix& lower, const Vec& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Gauss-Jordan inverse for very small matrices (3x3 in practice).
Matrix invert_small(const Matrix& a);

}  // namespace vdl
