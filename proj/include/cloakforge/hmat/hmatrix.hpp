#pragma once

// Hierarchical matrices: block tree construction, parallel leaf assembly,
// agglomeration and fast products.

#include <algorithm>
#include <atomic>
#include <concepts>
#include <exception>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <thread>
#include <vector>

#include "cloakforge/hmat/aca.hpp"
#include "cloakforge/hmat/cluster_tree.hpp"
#include "cloakforge/hmat/lowrank.hpp"

namespace cloakforge::hmat {

/// Matrix generator addressed by external indices. fill() must write
/// A(rows[a], cols[b]) into out(a, b) (out is pre-sized) and must be safe to
/// call concurrently.
template <class K>
concept BlockKernel = requires(const K& k, std::span<const std::size_t> r,
                               std::span<const std::size_t> c, CMatrix& out) {
    { k.fill(r, c, out) };
};

/// Adapts an entry function (i, j) -> Complex to BlockKernel.
template <class F>
struct EntryKernel {
    F f;
    void fill(std::span<const std::size_t> rows, std::span<const std::size_t> cols, CMatrix& out) const {
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b < cols.size(); ++b)
                out(static_cast<Index>(a), static_cast<Index>(b)) = f(rows[a], cols[b]);
    }
};
template <class F>
EntryKernel(F) -> EntryKernel<F>;

enum class BlockStatus { admissible, inadmissible, subdivided };

inline const char* to_string(BlockStatus s) {
    switch (s) {
        case BlockStatus::admissible: return "admissible";
        case BlockStatus::inadmissible: return "inadmissible";
        default: return "subdivided";
    }
}

struct BlockNode {
    std::size_t row_cluster = 0;
    std::size_t col_cluster = 0;
    Index row_begin = 0;  // tree-order offsets
    Index row_size = 0;
    Index col_begin = 0;
    Index col_size = 0;
    int level = 0;
    BlockStatus status = BlockStatus::inadmissible;
    CMatrix dense;                  // inadmissible
    std::vector<Index> pivots;      // row swaps of a factorized diagonal leaf
    LowRank lowrank;                // admissible
    std::vector<BlockNode> children;  // subdivided: (0,0), (0,1), (1,0), (1,1)

    bool is_leaf() const { return status != BlockStatus::subdivided; }
    BlockNode& child(int i, int j) { return children[static_cast<std::size_t>(2 * i + j)]; }
    const BlockNode& child(int i, int j) const { return children[static_cast<std::size_t>(2 * i + j)]; }

    std::size_t stored() const {
        switch (status) {
            case BlockStatus::admissible: return lowrank.stored();
            case BlockStatus::inadmissible: return static_cast<std::size_t>(dense.size());
            default: {
                std::size_t s = 0;
                for (const auto& c : children) s += c.stored();
                return s;
            }
        }
    }

    template <class Visit>
    void for_each_leaf(Visit&& v) const {
        if (is_leaf()) {
            v(*this);
            return;
        }
        for (const auto& c : children) c.for_each_leaf(v);
    }
    template <class Visit>
    void for_each_leaf(Visit&& v) {
        if (is_leaf()) {
            v(*this);
            return;
        }
        for (auto& c : children) c.for_each_leaf(v);
    }
};

// ---------------------------------------------------------------------------
// Block-level products. X and Y are in the block's local coordinates.

/// Y += alpha * B * X
inline void apply(const BlockNode& b, const Eigen::Ref<const CMatrix>& X, Eigen::Ref<CMatrix> Y,
                  Complex alpha = 1.0) {
    switch (b.status) {
        case BlockStatus::inadmissible:
            Y.noalias() += alpha * (b.dense * X);
            return;
        case BlockStatus::admissible: {
            if (b.lowrank.rank() == 0) return;
            const CMatrix t = b.lowrank.V.adjoint() * X;
            Y.noalias() += alpha * (b.lowrank.U * t);
            return;
        }
        case BlockStatus::subdivided:
            for (const auto& c : b.children)
                apply(c, X.middleRows(c.col_begin - b.col_begin, c.col_size),
                      Y.middleRows(c.row_begin - b.row_begin, c.row_size), alpha);
            return;
    }
}

/// Y += alpha * B^H * X
inline void apply_adjoint(const BlockNode& b, const Eigen::Ref<const CMatrix>& X, Eigen::Ref<CMatrix> Y,
                          Complex alpha = 1.0) {
    switch (b.status) {
        case BlockStatus::inadmissible:
            Y.noalias() += alpha * (b.dense.adjoint() * X);
            return;
        case BlockStatus::admissible: {
            if (b.lowrank.rank() == 0) return;
            const CMatrix t = b.lowrank.U.adjoint() * X;
            Y.noalias() += alpha * (b.lowrank.V * t);
            return;
        }
        case BlockStatus::subdivided:
            for (const auto& c : b.children)
                apply_adjoint(c, X.middleRows(c.row_begin - b.row_begin, c.row_size),
                              Y.middleRows(c.col_begin - b.col_begin, c.col_size), alpha);
            return;
    }
}

/// y += B * x for a single vector, written without temporaries so the result
/// does not depend on how many right-hand sides are processed together.
inline void apply_vector(const BlockNode& b, const CVector& x, Index xoff, CVector& y, Index yoff) {
    switch (b.status) {
        case BlockStatus::inadmissible:
            y.segment(yoff, b.row_size).noalias() += b.dense * x.segment(xoff, b.col_size);
            return;
        case BlockStatus::admissible: {
            if (b.lowrank.rank() == 0) return;
            CVector t = b.lowrank.V.adjoint() * x.segment(xoff, b.col_size);
            y.segment(yoff, b.row_size).noalias() += b.lowrank.U * t;
            return;
        }
        case BlockStatus::subdivided:
            for (const auto& c : b.children)
                apply_vector(c, x, xoff + (c.col_begin - b.col_begin), y, yoff + (c.row_begin - b.row_begin));
            return;
    }
}

/// Dense copy of a block in local coordinates.
inline CMatrix to_dense(const BlockNode& b) {
    switch (b.status) {
        case BlockStatus::inadmissible: return b.dense;
        case BlockStatus::admissible: return b.lowrank.dense();
        default: {
            CMatrix out(b.row_size, b.col_size);
            for (const auto& c : b.children)
                out.block(c.row_begin - b.row_begin, c.col_begin - b.col_begin, c.row_size, c.col_size) =
                    to_dense(c);
            return out;
        }
    }
}

// ---------------------------------------------------------------------------

struct AssemblyStats {
    std::size_t admissible_leaves = 0;
    std::size_t inadmissible_leaves = 0;
    Index max_rank = 0;
    std::size_t full_rank_aca = 0;
};

class HMatrix {
public:
    HMatrix() = default;
    HMatrix(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols, BlockNode root)
        : rows_(std::move(rows)), cols_(std::move(cols)), root_(std::move(root)) {}

    Index rows() const { return static_cast<Index>(rows_->size()); }
    Index cols() const { return static_cast<Index>(cols_->size()); }
    const ClusterTree& row_tree() const { return *rows_; }
    const ClusterTree& col_tree() const { return *cols_; }
    const std::shared_ptr<const ClusterTree>& row_tree_ptr() const { return rows_; }
    const std::shared_ptr<const ClusterTree>& col_tree_ptr() const { return cols_; }
    const BlockNode& root() const { return root_; }
    BlockNode& root() { return root_; }

    /// y = A x in external ordering.
    CVector multiply(const CVector& x) const {
        if (x.size() != cols()) throw Error("hmat_vecmul: dimension mismatch");
        CVector xt(cols()), yt = CVector::Zero(rows());
        const auto& cp = cols_->perm();
        for (Index p = 0; p < cols(); ++p) xt[p] = x[static_cast<Index>(cp[static_cast<std::size_t>(p)])];
        apply_vector(root_, xt, 0, yt, 0);
        CVector y(rows());
        const auto& rp = rows_->perm();
        for (Index p = 0; p < rows(); ++p) y[static_cast<Index>(rp[static_cast<std::size_t>(p)])] = yt[p];
        return y;
    }

    CMatrix multiply(const CMatrix& X) const {
        if (X.rows() != cols()) throw Error("hmat_vecmul: dimension mismatch");
        CMatrix Xt(cols(), X.cols()), Yt = CMatrix::Zero(rows(), X.cols());
        const auto& cp = cols_->perm();
        for (Index p = 0; p < cols(); ++p) Xt.row(p) = X.row(static_cast<Index>(cp[static_cast<std::size_t>(p)]));
        apply(root_, Xt, Yt);
        CMatrix Y(rows(), X.cols());
        const auto& rp = rows_->perm();
        for (Index p = 0; p < rows(); ++p) Y.row(static_cast<Index>(rp[static_cast<std::size_t>(p)])) = Yt.row(p);
        return Y;
    }

    /// Dense copy in external ordering.
    CMatrix to_dense() const {
        const CMatrix t = hmat::to_dense(root_);
        CMatrix out(rows(), cols());
        const auto& rp = rows_->perm();
        const auto& cp = cols_->perm();
        for (Index a = 0; a < rows(); ++a)
            for (Index b = 0; b < cols(); ++b)
                out(static_cast<Index>(rp[static_cast<std::size_t>(a)]), static_cast<Index>(cp[static_cast<std::size_t>(b)])) = t(a, b);
        return out;
    }

    std::size_t stored_scalars() const { return root_.stored(); }

    /// One line per leaf: `level row_lo row_hi col_lo col_hi status rank`
    /// with half-open tree-order ranges; dense leaves report min(m, n).
    void dump_structure(std::ostream& os) const {
        root_.for_each_leaf([&](const BlockNode& b) {
            const Index rank = b.status == BlockStatus::admissible ? b.lowrank.rank()
                                                                   : std::min(b.row_size, b.col_size);
            os << b.level << ' ' << b.row_begin << ' ' << b.row_begin + b.row_size << ' ' << b.col_begin << ' '
               << b.col_begin + b.col_size << ' ' << to_string(b.status) << ' ' << rank << '\n';
        });
    }

    AssemblyStats stats() const {
        AssemblyStats s;
        root_.for_each_leaf([&](const BlockNode& b) {
            if (b.status == BlockStatus::admissible) {
                ++s.admissible_leaves;
                s.max_rank = std::max(s.max_rank, b.lowrank.rank());
            } else {
                ++s.inadmissible_leaves;
            }
        });
        return s;
    }

private:
    std::shared_ptr<const ClusterTree> rows_;
    std::shared_ptr<const ClusterTree> cols_;
    BlockNode root_;
};

namespace detail {

inline void build_blocks(BlockNode& b, const ClusterTree& rt, std::size_t rc, const ClusterTree& ct,
                         std::size_t cc, double eta, int level) {
    const Cluster& r = rt.node(rc);
    const Cluster& c = ct.node(cc);
    b.row_cluster = rc;
    b.col_cluster = cc;
    b.row_begin = static_cast<Index>(r.begin);
    b.row_size = static_cast<Index>(r.size());
    b.col_begin = static_cast<Index>(c.begin);
    b.col_size = static_cast<Index>(c.size());
    b.level = level;
    if (admissible(rt, rc, ct, cc, eta)) {
        b.status = BlockStatus::admissible;
    } else if (r.is_leaf() || c.is_leaf()) {
        b.status = BlockStatus::inadmissible;
    } else {
        b.status = BlockStatus::subdivided;
        b.children.resize(4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                build_blocks(b.child(i, j), rt, r.children[static_cast<std::size_t>(i)], ct,
                             c.children[static_cast<std::size_t>(j)], eta, level + 1);
    }
}

template <BlockKernel K>
void fill_leaf(const K& kernel, BlockNode& b, const ClusterTree& rt, const ClusterTree& ct, double tol) {
    std::span<const std::size_t> rids(rt.perm().data() + b.row_begin, static_cast<std::size_t>(b.row_size));
    std::span<const std::size_t> cids(ct.perm().data() + b.col_begin, static_cast<std::size_t>(b.col_size));
    if (b.status == BlockStatus::inadmissible) {
        b.dense.resize(b.row_size, b.col_size);
        kernel.fill(rids, cids, b.dense);
        return;
    }
    CMatrix rowbuf(1, b.col_size), colbuf(b.row_size, 1);
    auto row = [&](Index i, CVector& out) {
        kernel.fill(rids.subspan(static_cast<std::size_t>(i), 1), cids, rowbuf);
        out = rowbuf.row(0).transpose();
    };
    auto col = [&](Index j, CVector& out) {
        kernel.fill(rids, cids.subspan(static_cast<std::size_t>(j), 1), colbuf);
        out = colbuf.col(0);
    };
    b.lowrank = aca(row, col, b.row_size, b.col_size, tol);
}

}  // namespace detail

/// Block tree by recursive descent over (row, col) cluster pairs; leaves are
/// filled by a pool of `workers` threads pulling from a shared task list
/// sorted by descending block size. Leaf content depends only on the kernel
/// and the geometry, never on the schedule.
template <BlockKernel K>
HMatrix assemble_hmatrix(const K& kernel, std::shared_ptr<const ClusterTree> rows,
                         std::shared_ptr<const ClusterTree> cols, double eta, double tol, unsigned workers = 1) {
    if (!(tol > 0.0)) throw Error("assemble_hmatrix: tolerance must be positive");
    BlockNode root;
    detail::build_blocks(root, *rows, rows->root(), *cols, cols->root(), eta, 0);

    std::vector<BlockNode*> tasks;
    root.for_each_leaf([&](BlockNode& b) { tasks.push_back(&b); });
    std::stable_sort(tasks.begin(), tasks.end(), [](const BlockNode* a, const BlockNode* b) {
        return a->row_size * a->col_size > b->row_size * b->col_size;
    });

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            BlockNode& b = *tasks[t];
            try {
                detail::fill_leaf(kernel, b, *rows, *cols, tol);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    std::ostringstream msg;
                    msg << "kernel evaluation failed in block rows [" << b.row_begin << ',' << b.row_begin + b.row_size
                        << ") cols [" << b.col_begin << ',' << b.col_begin + b.col_size << "): " << e.what();
                    failure = std::make_exception_ptr(Error(msg.str()));
                }
                next.store(tasks.size());
                return;
            }
        }
    };
    const unsigned n = std::max(1u, workers);
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return HMatrix(std::move(rows), std::move(cols), std::move(root));
}

namespace detail {

inline void agglomerate_node(BlockNode& b, double tol) {
    if (b.is_leaf()) return;
    for (auto& c : b.children) agglomerate_node(c, tol);
    for (const auto& c : b.children)
        if (c.status != BlockStatus::admissible) return;
    LowRank merged = merge_2x2(b.child(0, 0).lowrank, b.child(0, 1).lowrank, b.child(1, 0).lowrank,
                               b.child(1, 1).lowrank, tol);
    if (merged.stored() >= b.stored()) return;
    b.status = BlockStatus::admissible;
    b.lowrank = std::move(merged);
    b.children.clear();
}

}  // namespace detail

/// Bottom-up replacement of four low-rank siblings by one low-rank block,
/// accepted only when it stores fewer scalars.
inline HMatrix agglomerate(HMatrix h, double tol) {
    detail::agglomerate_node(h.root(), tol);
    return h;
}

inline CVector hmat_vecmul(const HMatrix& h, const CVector& x) { return h.multiply(x); }

}  // namespace cloakforge::hmat
