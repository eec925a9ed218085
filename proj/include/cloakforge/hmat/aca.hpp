#pragma once

// Adaptive cross approximation with partial pivoting.

#include <cmath>
#include <vector>

#include "cloakforge/hmat/lowrank.hpp"

namespace cloakforge::hmat {

struct AcaOptions {
    /// Recompute ||S_k||_F from the factors at every step instead of the
    /// incremental update (debug aid; O(k^2 (m+n)) per step).
    bool exact_norm = false;
};

struct AcaStats {
    Index rank = 0;
    Index skipped_rows = 0;
    bool full_rank = false;
};

/// ACA on an m x n block accessed through row and column callbacks:
///   row(i, out) writes A(i, 0..n-1) into out (size n)
///   col(j, out) writes A(0..m-1, j) into out (size m)
/// Returns A ~= U V^H. Crosses are added until
/// ||a_k|| ||b_k|| <= tol ||S_k||_F, the rank reaches min(m, n), or m
/// consecutive rows have a zero residual.
template <class RowFn, class ColFn>
LowRank aca(RowFn&& row, ColFn&& col, Index m, Index n, double tol, AcaStats* stats = nullptr,
            const AcaOptions& opts = {}) {
    const Index kmax = std::min(m, n);
    std::vector<CVector> us, ws;  // A ~= sum u_l w_l^T
    std::vector<char> used_row(static_cast<std::size_t>(m), 0), used_col(static_cast<std::size_t>(n), 0);
    CVector r(n), c(m);
    CVector prev_col;  // magnitude source for the next row after a zero pivot
    double norm2 = 0.0;
    Index skips = 0;
    Index skipped_total = 0;
    Index i = 0;

    auto next_unused_row = [&](const CVector* guide) -> Index {
        Index best = -1;
        double best_v = -1.0;
        for (Index t = 0; t < m; ++t) {
            if (used_row[t]) continue;
            const double v = guide ? std::abs((*guide)[t]) : 0.0;
            if (v > best_v) {
                best_v = v;
                best = t;
            }
        }
        return best;
    };

    while (static_cast<Index>(us.size()) < kmax) {
        row(i, r);
        for (std::size_t l = 0; l < us.size(); ++l) r -= us[l][i] * ws[l];
        used_row[i] = 1;

        Index j = -1;
        double best = 0.0;
        for (Index t = 0; t < n; ++t) {
            if (used_col[t]) continue;
            const double v = std::abs(r[t]);
            if (v > best) {
                best = v;
                j = t;
            }
        }
        if (j < 0) {
            ++skips;
            ++skipped_total;
            if (skips >= m) break;
            i = next_unused_row(prev_col.size() ? &prev_col : nullptr);
            if (i < 0) break;
            continue;
        }
        skips = 0;

        col(j, c);
        for (std::size_t l = 0; l < us.size(); ++l) c -= ws[l][j] * us[l];
        c /= r[j];
        used_col[j] = 1;

        const double nu = c.norm();
        const double nw = r.norm();
        if (opts.exact_norm) {
            us.push_back(c);
            ws.push_back(r);
            CMatrix U(m, us.size()), W(n, ws.size());
            for (std::size_t l = 0; l < us.size(); ++l) {
                U.col(l) = us[l];
                W.col(l) = ws[l];
            }
            norm2 = (U * W.transpose()).squaredNorm();
        } else {
            double inc = nu * nu * nw * nw;
            for (std::size_t l = 0; l < us.size(); ++l)
                inc += 2.0 * std::real(us[l].dot(c) * ws[l].dot(r));
            norm2 += inc;
            us.push_back(c);
            ws.push_back(r);
        }
        prev_col = c;

        if (nu * nw <= tol * std::sqrt(std::max(norm2, 0.0))) break;

        Index nexti = -1;
        double bi = -1.0;
        for (Index t = 0; t < m; ++t) {
            if (used_row[t]) continue;
            const double v = std::abs(c[t]);
            if (v > bi) {
                bi = v;
                nexti = t;
            }
        }
        if (nexti < 0) break;
        i = nexti;
    }

    const Index k = static_cast<Index>(us.size());
    LowRank out(m, n);
    out.U.resize(m, k);
    out.V.resize(n, k);
    for (Index l = 0; l < k; ++l) {
        out.U.col(l) = us[static_cast<std::size_t>(l)];
        out.V.col(l) = ws[static_cast<std::size_t>(l)].conjugate();
    }
    if (stats) {
        stats->rank = k;
        stats->skipped_rows = skipped_total;
        stats->full_rank = (k == kmax);
    }
    return out;
}

/// Entry-wise convenience form: eval(i, j) -> A(i, j).
template <class EntryFn>
LowRank aca_approximate(EntryFn&& eval, Index m, Index n, double tol, AcaStats* stats = nullptr,
                        const AcaOptions& opts = {}) {
    if (!(tol > 0.0)) throw Error("aca: tolerance must be positive");
    auto row = [&](Index i, CVector& out) {
        for (Index j = 0; j < n; ++j) out[j] = eval(i, j);
    };
    auto col = [&](Index j, CVector& out) {
        for (Index i = 0; i < m; ++i) out[i] = eval(i, j);
    };
    return aca(row, col, m, n, tol, stats, opts);
}

}  // namespace cloakforge::hmat
