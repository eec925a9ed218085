#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "cloakforge/common.hpp"

namespace cloakforge::hmat {

/// A ~= U * V^H with U: m x k, V: n x k.
struct LowRank {
    CMatrix U;
    CMatrix V;

    LowRank() = default;
    LowRank(Index m, Index n) : U(m, 0), V(n, 0) {}
    LowRank(CMatrix u, CMatrix v) : U(std::move(u)), V(std::move(v)) {}

    Index rows() const { return U.rows(); }
    Index cols() const { return V.rows(); }
    Index rank() const { return U.cols(); }
    CMatrix dense() const {
        if (rank() == 0) return CMatrix::Zero(rows(), cols());
        return U * V.adjoint();
    }
    std::size_t stored() const { return static_cast<std::size_t>(rank() * (rows() + cols())); }
};

namespace detail {

struct ThinQR {
    CMatrix Q;
    CMatrix R;
};

inline ThinQR thin_qr(const CMatrix& A) {
    const Index m = A.rows();
    const Index k = std::min(m, A.cols());
    Eigen::HouseholderQR<CMatrix> qr(A);
    ThinQR out;
    out.Q = qr.householderQ() * CMatrix::Identity(m, k);
    out.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return out;
}

// Smallest rank whose discarded tail satisfies sqrt(sum tail s^2) <= tol * ||s||.
inline Index truncation_rank(const Eigen::VectorXd& s, double tol) {
    const double total = s.squaredNorm();
    if (total == 0.0) return 0;
    const double budget = tol * tol * total;
    double tail = 0.0;
    Index r = s.size();
    while (r > 0 && tail + s[r - 1] * s[r - 1] <= budget) {
        tail += s[r - 1] * s[r - 1];
        --r;
    }
    return r;
}

}  // namespace detail

/// Recompress U V^H to the smallest rank meeting a relative Frobenius
/// tolerance: QR of both factors, SVD of R_U R_V^H, singular-value rounding.
inline LowRank truncate(const CMatrix& U, const CMatrix& V, double tol) {
    const Index m = U.rows();
    const Index n = V.rows();
    if (U.cols() == 0 || m == 0 || n == 0) return LowRank(m, n);
    const auto qu = detail::thin_qr(U);
    const auto qv = detail::thin_qr(V);
    const CMatrix core = qu.R * qv.R.adjoint();
    Eigen::JacobiSVD<CMatrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Index r = detail::truncation_rank(s, tol);
    if (r == 0) return LowRank(m, n);
    CMatrix newU = qu.Q * (svd.matrixU().leftCols(r) * s.head(r).asDiagonal());
    CMatrix newV = qv.Q * svd.matrixV().leftCols(r);
    return LowRank(std::move(newU), std::move(newV));
}

inline LowRank truncate(const LowRank& a, double tol) { return truncate(a.U, a.V, tol); }

/// Truncated SVD of a dense block.
inline LowRank to_lowrank(const CMatrix& A, double tol) {
    if (A.size() == 0) return LowRank(A.rows(), A.cols());
    Eigen::BDCSVD<CMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Index r = detail::truncation_rank(s, tol);
    if (r == 0) return LowRank(A.rows(), A.cols());
    return LowRank(svd.matrixU().leftCols(r) * s.head(r).asDiagonal(), svd.matrixV().leftCols(r));
}

/// a + b, truncated.
inline LowRank add_truncate(const LowRank& a, const LowRank& b, double tol) {
    if (b.rank() == 0) return a;
    if (a.rank() == 0) return truncate(b, tol);
    CMatrix U(a.rows(), a.rank() + b.rank());
    CMatrix V(a.cols(), a.rank() + b.rank());
    U << a.U, b.U;
    V << a.V, b.V;
    return truncate(U, V, tol);
}

/// Merge a 2x2 arrangement [[a00, a01], [a10, a11]] of low-rank blocks into a
/// single low-rank block with block-diagonal factor stacking.
inline LowRank merge_2x2(const LowRank& a00, const LowRank& a01, const LowRank& a10,
                         const LowRank& a11, double tol) {
    const Index m0 = a00.rows(), m1 = a10.rows();
    const Index n0 = a00.cols(), n1 = a01.cols();
    const Index k = a00.rank() + a01.rank() + a10.rank() + a11.rank();
    CMatrix U = CMatrix::Zero(m0 + m1, k);
    CMatrix V = CMatrix::Zero(n0 + n1, k);
    Index c = 0;
    auto put = [&](const LowRank& b, Index roff, Index coff) {
        U.block(roff, c, b.rows(), b.rank()) = b.U;
        V.block(coff, c, b.cols(), b.rank()) = b.V;
        c += b.rank();
    };
    put(a00, 0, 0);
    put(a01, 0, n0);
    put(a10, m0, 0);
    put(a11, m0, n0);
    return truncate(U, V, tol);
}

}  // namespace cloakforge::hmat
