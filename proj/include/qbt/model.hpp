#pragma once

#include "qbt/core.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <random>

namespace qbt {

/// y = C x + [x^T M_1 x, ..., x^T M_p x]^T. The single-output case is p = 1 with C absent.
struct OutputSpec {
    std::optional<Mat> C;
    std::vector<Mat> M;

    Index p() const {
        if (!M.empty()) return static_cast<Index>(M.size());
        return C ? C->rows() : 0;
    }
};

/// E x' = A x + B u with output spec.
struct DescriptorSystem {
    Mat E, A, B;
    OutputSpec output;
    std::map<std::string, std::string> tags;

    Index n() const { return A.rows(); }
    Index m() const { return B.cols(); }
    Index p() const { return output.p(); }
};

inline DescriptorSystem make_system(Mat E, Mat A, Mat B, std::vector<Mat> M,
                                    std::optional<Mat> C = std::nullopt) {
    DescriptorSystem s;
    s.E = std::move(E);
    s.A = std::move(A);
    s.B = std::move(B);
    s.output.M = std::move(M);
    s.output.C = std::move(C);
    return s;
}

/// Throws DimensionMismatch unless all shapes agree.
inline void check_dimensions(const DescriptorSystem& s) {
    using detail::require;
    const Index n = s.A.rows();
    require(s.A.cols() == n, ErrorCode::DimensionMismatch, "A must be square");
    require(s.E.rows() == n && s.E.cols() == n, ErrorCode::DimensionMismatch, "E must be n x n");
    require(s.B.rows() == n, ErrorCode::DimensionMismatch, "B must have n rows");
    require(!s.output.M.empty() || s.output.C.has_value(), ErrorCode::DimensionMismatch,
            "output needs at least one quadratic form or a linear part");
    for (const auto& M : s.output.M)
        require(M.rows() == n && M.cols() == n, ErrorCode::DimensionMismatch, "each M_j must be n x n");
    if (s.output.C) {
        require(s.output.C->cols() == n, ErrorCode::DimensionMismatch, "C must have n columns");
        require(s.output.M.empty() || s.output.C->rows() == static_cast<Index>(s.output.M.size()),
                ErrorCode::DimensionMismatch, "rows of C must equal the number of quadratic forms");
    }
}

struct ValidationReport {
    bool regular = false;
    std::vector<double> probe_rcond;
    std::vector<double> symmetry_defects;  // ||M_j - M_j^T||_F
    Index rank_E = 0;
    bool E_singular = false;
    std::optional<bool> stable;  // filled by the spectral overload
};

namespace detail {

/// Reciprocal condition estimate of an LU factorization. Eigen's estimator reports 1 when a
/// pivot is exactly zero, so that case is caught first.
template <class LU>
inline double lu_rcond(const LU& lu) {
    if (lu.rows() == 0) return 1.0;
    if ((lu.matrixLU().diagonal().array() == 0.0).any()) return 0.0;
    const double rc = lu.rcond();
    return std::isfinite(rc) ? rc : 0.0;
}

inline std::vector<double> probe_pencil(const Mat& E, const Mat& A, int probes = 5) {
    const Index n = A.rows();
    const double nE = E.norm(), nA = A.norm();
    const double rho = (nE > 0 && nA > 0) ? nA / nE : 1.0;
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    std::vector<double> out;
    for (int i = 0; i < probes; ++i) {
        const std::complex<double> s = std::polar(rho, ang(rng));
        Eigen::MatrixXcd P = s * E.cast<std::complex<double>>() - A.cast<std::complex<double>>();
        if (n == 0) {
            out.push_back(1.0);
            continue;
        }
        out.push_back(lu_rcond(Eigen::PartialPivLU<Eigen::MatrixXcd>(P)));
    }
    return out;
}

inline double singular_rcond_threshold(Index n) {
    return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<Index>(n, 1));
}

}  // namespace detail

/// Regularity probe, symmetry defects and rank of E. Never mutates the system.
inline ValidationReport validate(const DescriptorSystem& s) {
    check_dimensions(s);
    ValidationReport r;
    r.probe_rcond = detail::probe_pencil(s.E, s.A);
    const double thr = detail::singular_rcond_threshold(s.n());
    for (double rc : r.probe_rcond) r.regular = r.regular || rc > thr;
    detail::require(r.regular, ErrorCode::SingularPencil,
                    "s*E - A is numerically singular at every probe shift");
    for (const auto& M : s.output.M) r.symmetry_defects.push_back((M - M.transpose()).norm());
    Eigen::ColPivHouseholderQR<Mat> qr(s.E);
    qr.setThreshold(1e-12);
    r.rank_E = s.n() == 0 ? 0 : qr.rank();
    r.E_singular = r.rank_E < s.n();
    return r;
}

}  // namespace qbt
