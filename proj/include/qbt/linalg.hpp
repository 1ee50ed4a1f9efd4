#pragma once

// Dense kernels. LAPACK supplies the QZ step and quasi-triangular Sylvester
// back-substitution; SVD and symmetric eigenproblems go through Eigen.

#include "qbt/core.hpp"

#include <algorithm>
#include <cstddef>

extern "C" {
using qbt_lapack_select3 = int (*)(const double*, const double*, const double*);

void dgges_(const char* jobvsl, const char* jobvsr, const char* sort, qbt_lapack_select3 selctg,
            const int* n, double* a, const int* lda, double* b, const int* ldb, int* sdim,
            double* alphar, double* alphai, double* beta, double* vsl, const int* ldvsl,
            double* vsr, const int* ldvsr, double* work, const int* lwork, int* bwork, int* info,
            std::size_t, std::size_t, std::size_t);

void dtrsyl_(const char* trana, const char* tranb, const int* isgn, const int* m, const int* n,
             const double* a, const int* lda, const double* b, const int* ldb, double* c,
             const int* ldc, double* scale, int* info, std::size_t, std::size_t);
}

namespace qbt::linalg {

struct QZResult {
    Mat S, T;  // Q^T A Z = S (quasi-triangular), Q^T E Z = T (triangular)
    Mat Q, Z;
    Vec alphar, alphai, beta;
};

/// Real generalized Schur form of (A, E), eigenvalues left in LAPACK order.
inline QZResult qz(const Mat& A, const Mat& E) {
    const int n = static_cast<int>(A.rows());
    QZResult r;
    r.S = A;
    r.T = E;
    r.Q.resize(n, n);
    r.Z.resize(n, n);
    r.alphar.resize(n);
    r.alphai.resize(n);
    r.beta.resize(n);
    if (n == 0) return r;
    int sdim = 0, info = 0, lwork = -1;
    const int ld = std::max(1, n);
    double wq = 0;
    std::vector<int> bwork(n);
    dgges_("V", "V", "N", nullptr, &n, r.S.data(), &ld, r.T.data(), &ld, &sdim, r.alphar.data(),
           r.alphai.data(), r.beta.data(), r.Q.data(), &ld, r.Z.data(), &ld, &wq, &lwork,
           bwork.data(), &info, 1, 1, 1);
    lwork = static_cast<int>(wq);
    std::vector<double> work(std::max(lwork, 1));
    dgges_("V", "V", "N", nullptr, &n, r.S.data(), &ld, r.T.data(), &ld, &sdim, r.alphar.data(),
           r.alphai.data(), r.beta.data(), r.Q.data(), &ld, r.Z.data(), &ld, work.data(), &lwork,
           bwork.data(), &info, 1, 1, 1);
    detail::require(info == 0, ErrorCode::SolverFailure, "dgges failed, info=" + std::to_string(info));
    return r;
}

/// Solves op(A) X + sgn X op(B) = C for quasi-triangular A, B.
inline Mat trsyl(char trana, char tranb, int sgn, const Mat& A, const Mat& B, const Mat& C) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(B.rows());
    Mat X = C;
    if (m == 0 || n == 0) return X;
    double scale = 1.0;
    int info = 0;
    dtrsyl_(&trana, &tranb, &sgn, &m, &n, A.data(), &m, B.data(), &n, X.data(), &m, &scale, &info,
            1, 1);
    detail::require(info >= 0, ErrorCode::SolverFailure, "dtrsyl failed, info=" + std::to_string(info));
    detail::require(info == 0, ErrorCode::SolverFailure,
                    "Sylvester operator is (nearly) singular: spectra too close");
    if (scale != 1.0) X /= scale;
    return X;
}

struct SVDResult {
    Mat U, V;
    Vec s;
};

/// Thin SVD, X = U diag(s) V^T with s descending.
inline SVDResult svd(const Mat& X) {
    SVDResult r;
    const Index k = std::min(X.rows(), X.cols());
    if (k == 0) {
        r.U.setZero(X.rows(), 0);
        r.V.setZero(X.cols(), 0);
        r.s.resize(0);
        return r;
    }
    Eigen::BDCSVD<Mat> dec(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    r.U = dec.matrixU();
    r.V = dec.matrixV();
    r.s = dec.singularValues();
    return r;
}

struct EigResult {
    Vec w;  // ascending
    Mat V;
};

/// Symmetric eigendecomposition.
inline EigResult syev(const Mat& X) {
    EigResult r;
    if (X.rows() == 0) {
        r.w.resize(0);
        r.V.resize(0, 0);
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(X);
    detail::require(es.info() == Eigen::Success, ErrorCode::SolverFailure, "symmetric eigensolver did not converge");
    r.w = es.eigenvalues();
    r.V = es.eigenvectors();
    return r;
}

}  // namespace qbt::linalg
