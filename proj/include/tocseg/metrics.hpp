#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"

namespace tocseg {

// ---------------------------------------------------------------------------
// Linear boundary metrics
// ---------------------------------------------------------------------------

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

inline void require_same_n(const BoundarySet& ref, const BoundarySet& hyp) {
    if (ref.n != hyp.n)
        throw Error(Errc::LengthMismatch, "ref n=" + std::to_string(ref.n) +
                                              " vs hyp n=" + std::to_string(hyp.n));
}

} // namespace detail

// Greedy nearest-first matching of hypothesis boundaries against reference
// boundaries within +-tolerance positions. Both sets empty counts as a fully
// correct prediction of "no internal topic change".
inline PrecisionRecall boundary_f1(const BoundarySet& ref, const BoundarySet& hyp,
                                   int tolerance = 0) {
    detail::require_same_n(ref, hyp);
    if (ref.positions.empty() && hyp.positions.empty()) return {1.0, 1.0, 1.0};

    struct Cand {
        int dist, r, h;
    };
    std::vector<Cand> cands;
    for (int r : ref.positions)
        for (int h : hyp.positions)
            if (std::abs(r - h) <= tolerance) cands.push_back({std::abs(r - h), r, h});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return std::tie(a.dist, a.r, a.h) < std::tie(b.dist, b.r, b.h);
    });
    std::set<int> used_r, used_h;
    int matches = 0;
    for (const Cand& c : cands) {
        if (used_r.count(c.r) || used_h.count(c.h)) continue;
        used_r.insert(c.r);
        used_h.insert(c.h);
        ++matches;
    }

    PrecisionRecall pr;
    pr.precision = hyp.positions.empty() ? 0.0 : double(matches) / double(hyp.positions.size());
    pr.recall = ref.positions.empty() ? 0.0 : double(matches) / double(ref.positions.size());
    pr.f1 = (pr.precision + pr.recall) > 0.0
                ? 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall)
                : 0.0;
    return pr;
}

// Edit explanation of hyp from ref: exact matches are free, a near miss at
// offset 0 < d < n_t pairs one ref boundary with one hyp boundary as a
// transposition, and everything left over is an addition (deletions are
// counted symmetrically as additions).
struct BoundaryEditOps {
    int matches = 0;
    int additions = 0;
    std::vector<int> transpositions;   // offset distance d per transposed pair
};

// Greedy pairing, left to right on sorted ref positions, nearest offset first
// (ties resolve to the left hyp boundary). With the default window n_t=2 only
// adjacent offsets qualify and this greedy is minimal-cost; larger windows
// are guarded by a brute-force oracle in tests.
inline BoundaryEditOps boundary_edit_distance(const BoundarySet& ref, const BoundarySet& hyp,
                                              int n_t = 2) {
    detail::require_same_n(ref, hyp);
    if (n_t < 2)
        throw Error(Errc::InvalidWindow, "n_t must be >= 2, got " + std::to_string(n_t));

    BoundaryEditOps ops;
    std::vector<int> ref_rest, hyp_rest;
    std::set_intersection(ref.positions.begin(), ref.positions.end(), hyp.positions.begin(),
                          hyp.positions.end(), std::back_inserter(ref_rest));
    ops.matches = static_cast<int>(ref_rest.size());
    ref_rest.clear();
    std::set_difference(ref.positions.begin(), ref.positions.end(), hyp.positions.begin(),
                        hyp.positions.end(), std::back_inserter(ref_rest));
    std::set_difference(hyp.positions.begin(), hyp.positions.end(), ref.positions.begin(),
                        ref.positions.end(), std::back_inserter(hyp_rest));

    std::vector<bool> hyp_used(hyp_rest.size(), false);
    for (int r : ref_rest) {
        int best = -1;
        int best_d = n_t;
        for (std::size_t j = 0; j < hyp_rest.size(); ++j) {
            if (hyp_used[j]) continue;
            int d = std::abs(hyp_rest[j] - r);
            if (d >= 1 && d < n_t && d < best_d) {
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            hyp_used[best] = true;
            ops.transpositions.push_back(best_d);
        } else {
            ++ops.additions;
        }
    }
    for (std::size_t j = 0; j < hyp_rest.size(); ++j)
        if (!hyp_used[j]) ++ops.additions;
    return ops;
}

// Boundary similarity B: with M matches, A additions and transposed pairs of
// offsets d_t, B = 1 - (A + sum d_t/n_t) / (M + A + T). Two empty sets agree
// perfectly and score 1.
inline double boundary_similarity(const BoundarySet& ref, const BoundarySet& hyp, int n_t = 2) {
    BoundaryEditOps ops = boundary_edit_distance(ref, hyp, n_t);
    int total = ops.matches + ops.additions + static_cast<int>(ops.transpositions.size());
    if (total == 0) return 1.0;
    double cost = ops.additions;
    for (int d : ops.transpositions) cost += double(d) / double(n_t);
    return 1.0 - cost / double(total);
}

// ---------------------------------------------------------------------------
// Auxiliary penalty metrics (lower is better, 0 = perfect)
// ---------------------------------------------------------------------------

namespace detail {

// segment id of sentence i (1-based) = number of boundaries at positions < i
inline std::vector<int> segment_ids(const BoundarySet& bs) {
    std::vector<int> ids(bs.n + 1, 0);
    int seg = 0;
    std::size_t b = 0;
    for (int i = 1; i <= bs.n; ++i) {
        while (b < bs.positions.size() && bs.positions[b] < i) {
            ++seg;
            ++b;
        }
        ids[i] = seg;
    }
    return ids;
}

inline int standard_window(const BoundarySet& ref) {
    double mean_len = double(ref.n) / double(ref.segment_count());
    int k = static_cast<int>(std::llround(mean_len / 2.0));
    return std::clamp(k, 1, std::max(1, ref.n - 1));
}

} // namespace detail

// Pk with the standard window (half mean reference segment length, rounded).
inline double pk_metric(const BoundarySet& ref, const BoundarySet& hyp, int window = 0) {
    detail::require_same_n(ref, hyp);
    int k = window > 0 ? window : detail::standard_window(ref);
    if (ref.n - k < 1) return 0.0;
    auto rid = detail::segment_ids(ref);
    auto hid = detail::segment_ids(hyp);
    int disagreements = 0;
    for (int i = 1; i + k <= ref.n; ++i) {
        bool same_ref = rid[i] == rid[i + k];
        bool same_hyp = hid[i] == hid[i + k];
        if (same_ref != same_hyp) ++disagreements;
    }
    return double(disagreements) / double(ref.n - k);
}

inline double window_diff(const BoundarySet& ref, const BoundarySet& hyp, int window = 0) {
    detail::require_same_n(ref, hyp);
    int k = window > 0 ? window : detail::standard_window(ref);
    if (ref.n - k < 1) return 0.0;
    auto count_in = [](const BoundarySet& bs, int lo, int hi) {
        // boundaries p with lo <= p < hi
        auto it_lo = std::lower_bound(bs.positions.begin(), bs.positions.end(), lo);
        auto it_hi = std::lower_bound(bs.positions.begin(), bs.positions.end(), hi);
        return static_cast<int>(it_hi - it_lo);
    };
    int disagreements = 0;
    for (int i = 1; i + k <= ref.n; ++i)
        if (count_in(ref, i, i + k) != count_in(hyp, i, i + k)) ++disagreements;
    return double(disagreements) / double(ref.n - k);
}

// ---------------------------------------------------------------------------
// Hierarchical wrapper: level matrix, monotone alignment, B_hier
// ---------------------------------------------------------------------------

// Per-(reference level, hypothesis level) scores, rows = reference levels.
struct LevelScoreMatrix {
    std::vector<std::vector<double>> values;   // L_ref x L_hyp

    int rows() const { return static_cast<int>(values.size()); }
    int cols() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
};

// Non-decreasing map of reference levels onto hypothesis levels; phi[l] is
// 1-based.
struct LevelAlignment {
    std::vector<int> phi;
};

using LinearMetric = std::function<double(const BoundarySet&, const BoundarySet&)>;

inline LevelScoreMatrix level_score_matrix(const HierSegmentation& ref,
                                           const HierSegmentation& hyp,
                                           const LinearMetric& metric = nullptr) {
    if (ref.n != hyp.n)
        throw Error(Errc::LengthMismatch, "ref n=" + std::to_string(ref.n) +
                                              " vs hyp n=" + std::to_string(hyp.n));
    LinearMetric m = metric ? metric : [](const BoundarySet& a, const BoundarySet& b) {
        return boundary_similarity(a, b, 2);
    };
    LevelScoreMatrix out;
    out.values.resize(ref.levels.size());
    for (std::size_t l = 0; l < ref.levels.size(); ++l) {
        out.values[l].resize(hyp.levels.size());
        for (std::size_t k = 0; k < hyp.levels.size(); ++k)
            out.values[l][k] = m(ref.levels[l], hyp.levels[k]);
    }
    return out;
}

// Maximizes sum_l values[l][phi(l)] subject to phi non-decreasing, by dynamic
// programming over prefix maxima. Ties break toward the smallest hypothesis
// level at every step. O(L_ref * L_hyp).
inline std::pair<LevelAlignment, double> align_levels(const LevelScoreMatrix& m) {
    int R = m.rows();
    int C = m.cols();
    if (R < 1 || C < 1)
        throw Error(Errc::DimensionConflict, "level matrix must be at least 1x1");

    // best[l][k]: best total for levels 0..l with phi(l)=k
    std::vector<std::vector<double>> best(R, std::vector<double>(C));
    // prefix argmax of best[l][0..k], smallest index on ties
    std::vector<std::vector<int>> prefix_arg(R, std::vector<int>(C));

    best[0] = m.values[0];
    for (int l = 0; l < R; ++l) {
        if (l > 0)
            for (int k = 0; k < C; ++k)
                best[l][k] = m.values[l][k] + best[l - 1][prefix_arg[l - 1][k]];
        int arg = 0;
        for (int k = 0; k < C; ++k) {
            if (best[l][k] > best[l][arg]) arg = k;
            prefix_arg[l][k] = arg;
        }
    }

    LevelAlignment align;
    align.phi.resize(R);
    int k = prefix_arg[R - 1][C - 1];
    double total = best[R - 1][k];
    align.phi[R - 1] = k + 1;
    for (int l = R - 1; l > 0; --l) {
        k = prefix_arg[l - 1][k];
        align.phi[l - 1] = k + 1;
    }
    return {align, total};
}

// Hierarchical boundary similarity: average per-reference-level B under the
// best non-decreasing level alignment.
inline double b_hier(const HierSegmentation& ref, const HierSegmentation& hyp, int n_t = 2) {
    auto matrix = level_score_matrix(ref, hyp, [n_t](const BoundarySet& a, const BoundarySet& b) {
        return boundary_similarity(a, b, n_t);
    });
    auto [align, total] = align_levels(matrix);
    (void)align;
    return total / double(matrix.rows());
}

} // namespace tocseg
