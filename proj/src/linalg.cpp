#include "vdl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vdl {

Vec thomas_solve(const Vec& lower, const Vec& diag, const Vec& upper, const Vec& rhs) {
    std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw ValidationError("thomas_solve: band size mismatch");
    if (n == 0) return {};

    Vec c_star(n, 0.0), d_star(n, 0.0), x(n, 0.0);
    if (diag[0] == 0.0) throw ValidationError("thomas_solve: zero pivot at row 0");
    c_star[0] = upper[0] / diag[0];
    d_star[0] = rhs[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        double m = diag[i] - lower[i] * c_star[i - 1];
        if (m == 0.0) throw ValidationError("thomas_solve: zero pivot at row " + std::to_string(i));
        c_star[i] = upper[i] / m;
        d_star[i] = (rhs[i] - lower[i] * d_star[i - 1]) / m;
    }
    x[n - 1] = d_star[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d_star[i] - c_star[i] * x[i + 1];
    return x;
}

SymmetricEigen symmetric_eigen(const Matrix& a, int max_sweeps) {
    std::size_t n = a.rows();
    if (n != a.cols()) throw ValidationError("symmetric_eigen: square matrix required");

    Matrix m = a;
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += m(i, j) * m(i, j);
        return std::sqrt(2.0 * s);
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(m(i, j)));
    double tol = (scale > 0.0 ? scale : 1.0) * 1e-15 * static_cast<double>(n);

    for (int sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = m(p, q);
                if (std::abs(apq) <= tol * 1e-2) continue;
                double app = m(p, p), aqq = m(q, q);
                double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
                double c = std::cos(phi), s = std::sin(phi);
                for (std::size_t k = 0; k < n; ++k) {
                    double mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return m(i, i) > m(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = m(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

Matrix cholesky_lower(const Matrix& a) {
    std::size_t n = a.rows();
    if (n != a.cols()) throw ValidationError("cholesky_lower: square matrix required");
    Matrix l(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw ValidationError("cholesky_lower: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

Vec forward_substitute(const Matrix& lower, const Vec& b) {
    std::size_t n = lower.rows();
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x[k];
        x[i] = s / lower(i, i);
    }
    return x;
}

Vec backward_substitute_transposed(const Matrix& lower, const Vec& b) {
    std::size_t n = lower.rows();
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= lower(k, i) * x[k];
        x[i] = s / lower(i, i);
    }
    return x;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ValidationError("matmul: shape mismatch");
    Matrix c(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix invert_small(const Matrix& a) {
    std::size_t n = a.rows();
    if (n != a.cols()) throw ValidationError("invert_small: square matrix required");
    Matrix aug(n, 2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
        aug(i, n + i) = 1.0;
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(aug(r, col)) > std::abs(aug(piv, col))) piv = r;
        if (aug(piv, col) == 0.0) throw ValidationError("invert_small: singular matrix");
        if (piv != col)
            for (std::size_t j = 0; j < 2 * n; ++j) std::swap(aug(piv, j), aug(col, j));
        double d = aug(col, col);
        for (std::size_t j = 0; j < 2 * n; ++j) aug(col, j) /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = aug(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < 2 * n; ++j) aug(r, j) -= f * aug(col, j);
        }
    }
    Matrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) inv(i, j) = aug(i, n + j);
    return inv;
}

}  // namespace vdl
