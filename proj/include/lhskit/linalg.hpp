#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "lhskit/errors.hpp"

namespace lhskit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SolveLimits {
    double cond_max = 1e8;       // IllConditioned beyond this
    double rank_cutoff = 1e-12;  // relative sigma below which the system is singular
    double residual_tol = 1e-10; // consistency requirement: |Ax-b| <= tol*(1+|b|)
};

// Solve A x = b for the pointwise systems assembled from form values.
// Overdetermined systems must be consistent; an inconsistent or rank-deficient
// system raises SingularSystem with the smallest singular value.
inline VectorXd solve_pointwise(const MatrixXd& A, const VectorXd& b,
                                const SolveLimits& lim = {}) {
    Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double smax = sv.size() ? sv(0) : 0.0;
    double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    if (smax <= 0.0 || smin <= lim.rank_cutoff * smax)
        throw SingularSystem("pointwise system is rank deficient", smin);
    if (smax / smin > lim.cond_max)
        throw IllConditioned("pointwise system is ill conditioned", smax / smin);
    VectorXd x = svd.solve(b);
    double resid = (A * x - b).norm();
    if (resid > lim.residual_tol * (1.0 + b.norm()))
        throw SingularSystem("pointwise system is inconsistent (rhs outside image)", smin);
    return x;
}

inline Eigen::VectorXd singular_values(const MatrixXd& A) {
    Eigen::JacobiSVD<MatrixXd> svd(A);
    return svd.singularValues();
}

// Number of singular values above rel_cutoff * sigma_max.
inline int numeric_rank(const MatrixXd& A, double rel_cutoff = 1e-8) {
    auto sv = singular_values(A);
    if (sv.size() == 0 || sv(0) <= 0.0) return 0;
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_cutoff * sv(0)) ++r;
    return r;
}

// Unit kernel vector of a corank-one matrix (right singular vector of the
// smallest singular value). Raises when the corank is not exactly one.
inline VectorXd kernel_vector(const MatrixXd& A, double rel_cutoff = 1e-8) {
    Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double smax = sv(0);
    if (smax <= 0.0) throw SingularSystem("zero matrix has no distinguished kernel line", 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_cutoff * smax) ++rank;
    if (rank != A.cols() - 1)
        throw SingularSystem("matrix does not have corank one", sv(sv.size() - 1));
    return svd.matrixV().col(A.cols() - 1);
}

// Pfaffian of a 4x4 antisymmetric matrix; det = Pf^2.
inline double pfaffian4(const MatrixXd& A) {
    return A(0, 1) * A(2, 3) - A(0, 2) * A(1, 3) + A(0, 3) * A(1, 2);
}

}  // namespace lhskit
