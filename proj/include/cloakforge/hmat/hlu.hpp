#pragma once

// LU factorization in truncated H-arithmetic.
//
// Diagonal leaves are factorized densely with partial pivoting restricted to
// the leaf. Row swaps are applied lazily when a substitution reaches the
// leaf, so off-diagonal L blocks are stored with the rows of the later
// diagonal leaves unpermuted.

#include <memory>

#include "cloakforge/hmat/hmatrix.hpp"

namespace cloakforge::hmat {

namespace detail {

inline void dense_lu(CMatrix& A, std::vector<Index>& piv) {
    const Index n = A.rows();
    piv.resize(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        Index p = k;
        double best = std::abs(A(k, k));
        for (Index i = k + 1; i < n; ++i) {
            const double v = std::abs(A(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best == 0.0) throw SolverError("singular system");
        piv[static_cast<std::size_t>(k)] = p;
        if (p != k) A.row(k).swap(A.row(p));
        const Index r = n - k - 1;
        if (r == 0) continue;
        A.col(k).tail(r) /= A(k, k);
        A.bottomRightCorner(r, r).noalias() -= A.col(k).tail(r) * A.row(k).tail(r);
    }
}

inline void apply_pivots(const std::vector<Index>& piv, Eigen::Ref<CMatrix> M) {
    for (std::size_t k = 0; k < piv.size(); ++k) {
        const Index p = piv[k];
        if (p != static_cast<Index>(k)) M.row(static_cast<Index>(k)).swap(M.row(p));
    }
}

// M := L^{-1} M  (unit lower factor, with leaf pivoting)
inline void trsm_lower(const BlockNode& L, Eigen::Ref<CMatrix> M) {
    if (L.status == BlockStatus::inadmissible) {
        apply_pivots(L.pivots, M);
        L.dense.triangularView<Eigen::UnitLower>().solveInPlace(M);
        return;
    }
    const BlockNode& L00 = L.child(0, 0);
    const BlockNode& L10 = L.child(1, 0);
    const BlockNode& L11 = L.child(1, 1);
    auto M0 = M.topRows(L00.row_size);
    auto M1 = M.bottomRows(L11.row_size);
    trsm_lower(L00, M0);
    apply(L10, M0, M1, -1.0);
    trsm_lower(L11, M1);
}

// M := U^{-1} M  (non-unit upper factor)
inline void trsm_upper(const BlockNode& U, Eigen::Ref<CMatrix> M) {
    if (U.status == BlockStatus::inadmissible) {
        U.dense.triangularView<Eigen::Upper>().solveInPlace(M);
        return;
    }
    const BlockNode& U00 = U.child(0, 0);
    const BlockNode& U01 = U.child(0, 1);
    const BlockNode& U11 = U.child(1, 1);
    auto M0 = M.topRows(U00.row_size);
    auto M1 = M.bottomRows(U11.row_size);
    trsm_upper(U11, M1);
    apply(U01, M1, M0, -1.0);
    trsm_upper(U00, M0);
}

// M := M U^{-1}, expressed on the adjoint: M^H := U^{-H} M^H. Mh holds M^H.
inline void trsm_upper_right_adj(const BlockNode& U, Eigen::Ref<CMatrix> Mh) {
    if (U.status == BlockStatus::inadmissible) {
        U.dense.adjoint().triangularView<Eigen::Lower>().solveInPlace(Mh);
        return;
    }
    const BlockNode& U00 = U.child(0, 0);
    const BlockNode& U01 = U.child(0, 1);
    const BlockNode& U11 = U.child(1, 1);
    auto M0 = Mh.topRows(U00.col_size);
    auto M1 = Mh.bottomRows(U11.col_size);
    trsm_upper_right_adj(U00, M0);
    apply_adjoint(U01, M0, M1, -1.0);
    trsm_upper_right_adj(U11, M1);
}

inline CMatrix dense_of(const BlockNode& b) { return hmat::to_dense(b); }

inline LowRank restrict(const LowRank& p, Index r0, Index m, Index c0, Index n) {
    return LowRank(p.U.middleRows(r0, m), p.V.middleRows(c0, n));
}

// C += P for a low-rank P.
inline void add_lowrank(BlockNode& C, const LowRank& P, double tol) {
    if (P.rank() == 0) return;
    switch (C.status) {
        case BlockStatus::inadmissible:
            C.dense.noalias() += P.U * P.V.adjoint();
            return;
        case BlockStatus::admissible:
            C.lowrank = add_truncate(C.lowrank, P, tol);
            return;
        case BlockStatus::subdivided:
            for (auto& c : C.children)
                add_lowrank(c, restrict(P, c.row_begin - C.row_begin, c.row_size, c.col_begin - C.col_begin, c.col_size),
                            tol);
            return;
    }
}

// A * B as a truncated low-rank matrix.
inline LowRank product_lowrank(const BlockNode& A, const BlockNode& B, double tol) {
    const Index m = A.row_size, n = B.col_size;
    if (A.status == BlockStatus::admissible) {
        if (A.lowrank.rank() == 0) return LowRank(m, n);
        CMatrix V = CMatrix::Zero(n, A.lowrank.rank());
        apply_adjoint(B, A.lowrank.V, V);
        return truncate(A.lowrank.U, V, tol);
    }
    if (B.status == BlockStatus::admissible) {
        if (B.lowrank.rank() == 0) return LowRank(m, n);
        CMatrix U = CMatrix::Zero(m, B.lowrank.rank());
        apply(A, B.lowrank.U, U);
        return truncate(U, B.lowrank.V, tol);
    }
    const Index inner = A.col_size;
    if (A.status == BlockStatus::inadmissible || B.status == BlockStatus::inadmissible) {
        if (inner <= std::min(m, n)) {
            // Exact rank <= inner: keep the factors.
            CMatrix V = dense_of(B).adjoint();
            return truncate(A.status == BlockStatus::inadmissible ? A.dense : dense_of(A), V, tol);
        }
        CMatrix P = CMatrix::Zero(m, n);
        if (A.status == BlockStatus::inadmissible) {
            CMatrix Ph = CMatrix::Zero(n, m);
            apply_adjoint(B, A.dense.adjoint(), Ph);
            P = Ph.adjoint();
        } else {
            apply(A, B.dense, P);
        }
        return to_lowrank(P, tol);
    }
    // Both subdivided.
    LowRank parts[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            LowRank acc = product_lowrank(A.child(i, 0), B.child(0, j), tol);
            acc = add_truncate(acc, product_lowrank(A.child(i, 1), B.child(1, j), tol), tol);
            parts[i][j] = std::move(acc);
        }
    return merge_2x2(parts[0][0], parts[0][1], parts[1][0], parts[1][1], tol);
}

// C += alpha * A * B for a dense target.
inline void mul_add_dense(Eigen::Ref<CMatrix> C, const BlockNode& A, const BlockNode& B, Complex alpha) {
    if (A.status == BlockStatus::admissible) {
        if (A.lowrank.rank() == 0) return;
        CMatrix W = CMatrix::Zero(B.col_size, A.lowrank.rank());
        apply_adjoint(B, A.lowrank.V, W);
        C.noalias() += alpha * (A.lowrank.U * W.adjoint());
        return;
    }
    if (B.status == BlockStatus::admissible) {
        if (B.lowrank.rank() == 0) return;
        CMatrix W = CMatrix::Zero(A.row_size, B.lowrank.rank());
        apply(A, B.lowrank.U, W);
        C.noalias() += alpha * (W * B.lowrank.V.adjoint());
        return;
    }
    if (A.status == BlockStatus::inadmissible) {
        CMatrix Wh = CMatrix::Zero(B.col_size, A.row_size);
        apply_adjoint(B, A.dense.adjoint(), Wh);
        C.noalias() += alpha * Wh.adjoint();
        return;
    }
    if (B.status == BlockStatus::inadmissible) {
        apply(A, B.dense, C, alpha);
        return;
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const BlockNode& a0 = A.child(i, 0);
            const BlockNode& b0 = B.child(0, j);
            auto Cij = C.block(a0.row_begin - A.row_begin, b0.col_begin - B.col_begin, a0.row_size, b0.col_size);
            mul_add_dense(Cij, a0, b0, alpha);
            mul_add_dense(Cij, A.child(i, 1), B.child(1, j), alpha);
        }
}

// C += alpha * A * B in H-arithmetic.
inline void mul_add(BlockNode& C, const BlockNode& A, const BlockNode& B, Complex alpha, double tol) {
    if (C.status == BlockStatus::inadmissible) {
        mul_add_dense(C.dense, A, B, alpha);
        return;
    }
    if (C.status == BlockStatus::subdivided && A.status == BlockStatus::subdivided &&
        B.status == BlockStatus::subdivided) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) mul_add(C.child(i, j), A.child(i, k), B.child(k, j), alpha, tol);
        return;
    }
    LowRank P = product_lowrank(A, B, tol);
    P.U *= alpha;
    add_lowrank(C, P, tol);
}

// B := L^{-1} B in H-arithmetic.
inline void solve_lower_left(const BlockNode& L, BlockNode& B, double tol) {
    switch (B.status) {
        case BlockStatus::inadmissible:
            trsm_lower(L, B.dense);
            return;
        case BlockStatus::admissible:
            if (B.lowrank.rank() > 0) trsm_lower(L, B.lowrank.U);
            return;
        case BlockStatus::subdivided:
            for (int j = 0; j < 2; ++j) {
                solve_lower_left(L.child(0, 0), B.child(0, j), tol);
                mul_add(B.child(1, j), L.child(1, 0), B.child(0, j), -1.0, tol);
                solve_lower_left(L.child(1, 1), B.child(1, j), tol);
            }
            return;
    }
}

// B := B U^{-1} in H-arithmetic.
inline void solve_upper_right(const BlockNode& U, BlockNode& B, double tol) {
    switch (B.status) {
        case BlockStatus::inadmissible: {
            CMatrix Bh = B.dense.adjoint();
            trsm_upper_right_adj(U, Bh);
            B.dense = Bh.adjoint();
            return;
        }
        case BlockStatus::admissible:
            if (B.lowrank.rank() > 0) trsm_upper_right_adj(U, B.lowrank.V);
            return;
        case BlockStatus::subdivided:
            for (int i = 0; i < 2; ++i) {
                solve_upper_right(U.child(0, 0), B.child(i, 0), tol);
                mul_add(B.child(i, 1), B.child(i, 0), U.child(0, 1), -1.0, tol);
                solve_upper_right(U.child(1, 1), B.child(i, 1), tol);
            }
            return;
    }
}

inline void lu(BlockNode& A, double tol) {
    if (A.status == BlockStatus::inadmissible) {
        if (A.row_size != A.col_size) throw Error("hlu: non-square diagonal leaf");
        dense_lu(A.dense, A.pivots);
        return;
    }
    if (A.status == BlockStatus::admissible) throw Error("hlu: admissible diagonal block");
    lu(A.child(0, 0), tol);
    solve_lower_left(A.child(0, 0), A.child(0, 1), tol);
    solve_upper_right(A.child(0, 0), A.child(1, 0), tol);
    mul_add(A.child(1, 1), A.child(1, 0), A.child(0, 1), -1.0, tol);
    lu(A.child(1, 1), tol);
}

}  // namespace detail

/// L and U share one block tree: strictly lower blocks hold L, the rest U.
class HLUFactors {
public:
    HLUFactors() = default;
    HLUFactors(std::shared_ptr<const ClusterTree> tree, BlockNode root)
        : tree_(std::move(tree)), root_(std::move(root)) {}

    Index size() const { return static_cast<Index>(tree_->size()); }
    const BlockNode& root() const { return root_; }
    const ClusterTree& tree() const { return *tree_; }
    std::size_t stored_scalars() const { return root_.stored(); }

    /// Solves A X = B column by column in external ordering. Columns are
    /// processed independently, so the result for one column does not
    /// depend on which other columns are solved alongside it.
    CMatrix solve(const CMatrix& B) const {
        if (B.rows() != size()) throw Error("hlu_solve: dimension mismatch");
        const auto& perm = tree_->perm();
        CMatrix X(B.rows(), B.cols());
        CMatrix x(B.rows(), 1);
        for (Index j = 0; j < B.cols(); ++j) {
            for (Index p = 0; p < size(); ++p) x(p, 0) = B(static_cast<Index>(perm[static_cast<std::size_t>(p)]), j);
            detail::trsm_lower(root_, x);
            detail::trsm_upper(root_, x);
            for (Index p = 0; p < size(); ++p) X(static_cast<Index>(perm[static_cast<std::size_t>(p)]), j) = x(p, 0);
        }
        return X;
    }

    CVector solve(const CVector& b) const {
        CMatrix B = b;
        return solve(B).col(0);
    }

private:
    std::shared_ptr<const ClusterTree> tree_;
    BlockNode root_;
};

/// Factorizes a copy of `h`; the input stays untouched.
inline HLUFactors hlu_factorize(const HMatrix& h, double tol) {
    if (h.row_tree_ptr() != h.col_tree_ptr()) throw Error("hlu: row and column trees must be identical");
    if (!(tol > 0.0)) throw Error("hlu: tolerance must be positive");
    BlockNode root = h.root();
    detail::lu(root, tol);
    return HLUFactors(h.row_tree_ptr(), std::move(root));
}

inline CMatrix hlu_solve(const HLUFactors& f, const CMatrix& B) { return f.solve(B); }
inline CVector hlu_solve(const HLUFactors& f, const CVector& b) { return f.solve(b); }

}  // namespace cloakforge::hmat
