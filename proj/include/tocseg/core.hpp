#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tocseg/error.hpp"

namespace tocseg {

// ---------------------------------------------------------------------------
// Document model
// ---------------------------------------------------------------------------

// One timed sentence. Indices are 1-based everywhere in this library: prompt
// lines, ToC entries and reference files all use the same convention.
struct Sentence {
    int index = 0;         // 1..n within the document
    std::string text;
    double start = 0.0;    // seconds from audio start
    double end = 0.0;      // seconds from audio start, end >= start
};

struct Transcript {
    std::string doc_id;
    std::optional<std::string> speaker_id;
    std::vector<Sentence> sentences;   // sorted by index, indices exactly 1..n

    int n() const { return static_cast<int>(sentences.size()); }
};

// Sorted set of inter-sentence boundary positions for one level. Position p
// means "a boundary between sentence p and p+1", so valid positions are
// 1..n-1. Document start and end are never stored.
struct BoundarySet {
    int n = 0;
    std::vector<int> positions;   // sorted, unique

    int segment_count() const { return static_cast<int>(positions.size()) + 1; }

    bool operator==(const BoundarySet&) const = default;
};

// Normalizing constructor: sorts and deduplicates.
inline BoundarySet make_boundary_set(int n, std::vector<int> positions) {
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    return BoundarySet{n, std::move(positions)};
}

// Coarse-to-fine stack of boundary sets. levels[0] is the coarsest. Every
// boundary of level l persists at level l+1 (subset relation).
struct HierSegmentation {
    int n = 0;
    std::vector<BoundarySet> levels;

    int depth() const { return static_cast<int>(levels.size()); }

    bool operator==(const HierSegmentation&) const = default;
};

// ---------------------------------------------------------------------------
// Table of contents
// ---------------------------------------------------------------------------

struct TocEntry {
    std::vector<int> number;   // dotted path, e.g. {2,2,1}; all components >= 1
    std::string title;
    int start_index = 0;       // 1-based sentence index

    int depth() const { return static_cast<int>(number.size()); }

    bool operator==(const TocEntry&) const = default;
};

struct Toc {
    std::vector<TocEntry> entries;

    bool operator==(const Toc&) const = default;
};

// Canonical dotted numbering for a depth sequence: sibling counters increase
// by 1, descending to a child resets the child counter to 1. The depth
// sequence must start at 1 and never jump by more than +1.
inline std::vector<std::vector<int>> canonical_numbers(const std::vector<int>& depths) {
    std::vector<std::vector<int>> out;
    out.reserve(depths.size());
    std::vector<int> counters;
    for (std::size_t i = 0; i < depths.size(); ++i) {
        int d = depths[i];
        if (d < 1 || d > static_cast<int>(counters.size()) + 1)
            throw Error(Errc::InvalidToc, "depth sequence invalid at entry " + std::to_string(i + 1));
        if (d == static_cast<int>(counters.size()) + 1) {
            counters.push_back(1);
        } else {
            counters.resize(d);
            counters.back() += 1;
        }
        out.push_back(counters);
    }
    return out;
}

// Diagnostic check of every Toc invariant. Returns one human-readable
// violation per problem; empty means valid. Entry positions in messages are
// 1-based.
inline std::vector<std::string> validate_toc(const Toc& toc) {
    std::vector<std::string> v;
    const auto& es = toc.entries;
    if (es.empty()) {
        v.push_back("toc has no entries");
        return v;
    }
    for (std::size_t i = 0; i < es.size(); ++i) {
        const TocEntry& e = es[i];
        const std::string at = "entry " + std::to_string(i + 1);
        if (e.number.empty())
            v.push_back(at + ": empty dotted number");
        for (int c : e.number)
            if (c < 1) {
                v.push_back(at + ": non-positive number component");
                break;
            }
        if (e.start_index < 1)
            v.push_back(at + ": start_index " + std::to_string(e.start_index) + " < 1");
        if (e.title.empty())
            v.push_back(at + ": empty title");
        else if (e.title.front() == ' ' || e.title.back() == ' ' ||
                 e.title.find('\n') != std::string::npos)
            v.push_back(at + ": title has surrounding whitespace or newline");
    }
    if (es.front().start_index != 1)
        v.push_back("entry 1: first entry must start at sentence 1");
    if (es.front().depth() != 1)
        v.push_back("entry 1: first entry must have depth 1");
    for (std::size_t i = 1; i < es.size(); ++i) {
        const std::string at = "entry " + std::to_string(i + 1);
        int d_prev = es[i - 1].depth();
        int d = es[i].depth();
        if (es[i].start_index < es[i - 1].start_index) {
            v.push_back(at + ": start_index decreases");
        } else if (es[i].start_index == es[i - 1].start_index) {
            // Equal starts are only valid for a first subtopic opening where
            // its parent opens (e.g. "2" and "2.1" sharing a start).
            if (d != d_prev + 1)
                v.push_back(at + ": duplicate start_index without parent-child nesting");
        }
        if (d > d_prev + 1)
            v.push_back(at + ": depth jumps from " + std::to_string(d_prev) + " to " +
                        std::to_string(d));
    }
    if (v.empty()) {
        std::vector<int> depths;
        depths.reserve(es.size());
        for (const auto& e : es) depths.push_back(e.depth());
        auto canon = canonical_numbers(depths);
        for (std::size_t i = 0; i < es.size(); ++i)
            if (es[i].number != canon[i])
                v.push_back("entry " + std::to_string(i + 1) + ": dotted number inconsistent with document order");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

// Outline form -> boundary form. Level l collects the boundaries of every
// entry with depth <= l, so coarse boundaries persist at all finer levels by
// construction. An entry starting at sentence 1 contributes no boundary.
inline HierSegmentation toc_to_hierseg(const Toc& toc, int n) {
    auto violations = validate_toc(toc);
    if (!violations.empty())
        throw Error(Errc::InvalidToc, violations.front());
    int max_depth = 0;
    for (const auto& e : toc.entries) {
        if (e.start_index > n)
            throw Error(Errc::IndexOutOfRange,
                        "start_index " + std::to_string(e.start_index) + " > n=" + std::to_string(n));
        max_depth = std::max(max_depth, e.depth());
    }
    HierSegmentation hs;
    hs.n = n;
    for (int l = 1; l <= max_depth; ++l) {
        std::set<int> pos;
        for (const auto& e : toc.entries)
            if (e.depth() <= l && e.start_index > 1)
                pos.insert(e.start_index - 1);
        hs.levels.push_back(BoundarySet{n, std::vector<int>(pos.begin(), pos.end())});
    }
    return hs;
}

// Contiguous (start_sentence, end_sentence) ranges of one level, inclusive.
inline std::vector<std::pair<int, int>> hierseg_to_segments(const HierSegmentation& hs, int level) {
    if (level < 1 || level > hs.depth())
        throw Error(Errc::LevelOutOfRange,
                    "level " + std::to_string(level) + " not in 1.." + std::to_string(hs.depth()));
    const auto& positions = hs.levels[level - 1].positions;
    std::vector<std::pair<int, int>> segments;
    int start = 1;
    for (int p : positions) {
        segments.emplace_back(start, p);
        start = p + 1;
    }
    segments.emplace_back(start, hs.n);
    return segments;
}

// Diagnostic invariant check; empty result means valid. Each violation names
// the level and offending position.
inline std::vector<std::string> validate_hierseg(const HierSegmentation& hs) {
    std::vector<std::string> v;
    if (hs.levels.empty()) {
        v.push_back("no levels");
        return v;
    }
    if (hs.n < 1)
        v.push_back("n must be >= 1");
    for (std::size_t l = 0; l < hs.levels.size(); ++l) {
        const BoundarySet& bs = hs.levels[l];
        const std::string at = "level " + std::to_string(l + 1);
        if (bs.n != hs.n)
            v.push_back(at + ": sentence count " + std::to_string(bs.n) + " != " + std::to_string(hs.n));
        for (std::size_t i = 0; i < bs.positions.size(); ++i) {
            int p = bs.positions[i];
            if (p < 1 || p > hs.n - 1)
                v.push_back(at + ": position " + std::to_string(p) + " outside 1.." + std::to_string(hs.n - 1));
            if (i > 0 && bs.positions[i - 1] >= p)
                v.push_back(at + ": position " + std::to_string(p) + " not strictly increasing");
        }
    }
    for (std::size_t l = 0; l + 1 < hs.levels.size(); ++l) {
        const auto& coarse = hs.levels[l].positions;
        const auto& fine = hs.levels[l + 1].positions;
        for (int p : coarse)
            if (!std::binary_search(fine.begin(), fine.end(), p))
                v.push_back("level " + std::to_string(l + 2) + ": position " + std::to_string(p) +
                            " from level " + std::to_string(l + 1) + " does not persist");
    }
    return v;
}

} // namespace tocseg
