#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"

namespace tocseg {

// What parsing/repair did to the input. Empty iff the input was already a
// valid ToC in canonical form.
struct ParseDiagnostics {
    std::vector<std::pair<int, std::string>> dropped_lines;   // (1-based line, reason)
    std::vector<std::string> repairs;

    bool empty() const { return dropped_lines.empty() && repairs.empty(); }
};

// Entry as it came out of the model, before repair. The dotted number is kept
// only as a depth hint; authoritative numbering is recomputed.
struct RawTocEntry {
    std::vector<int> number;
    std::string title;
    int start_index = 0;
    int source_line = 0;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string format_dotted(const std::vector<int>& number) {
    std::string s;
    for (std::size_t i = 0; i < number.size(); ++i) {
        if (i) s += '.';
        s += std::to_string(number[i]);
    }
    return s;
}

// One line per entry: `<dotted-number> <title> [<start_index>]`.
inline std::string serialize_toc(const Toc& toc) {
    std::string out;
    for (const auto& e : toc.entries) {
        out += format_dotted(e.number);
        out += ' ';
        out += e.title;
        out += " [";
        out += std::to_string(e.start_index);
        out += "]\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Line grammar
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Matches the canonical entry grammar
//   ^\s*(\d+(\.\d+)*)[.)]?\s+(.+?)\s*\[(\d+)\]\s*$
// with the documented tolerances: an optional leading markdown bullet and
// trailing punctuation after the index bracket. Returns false when the line
// is not an entry.
inline bool parse_toc_line(std::string_view line, RawTocEntry& out) {
    std::string_view s = trim(line);
    if (s.empty()) return false;

    // optional markdown bullet: "- ", "* ", "+ ", "> ", or a UTF-8 bullet
    if ((s.front() == '-' || s.front() == '*' || s.front() == '+' || s.front() == '>') &&
        s.size() > 1 && s[1] == ' ') {
        s = trim(s.substr(2));
    } else if (s.size() >= 3 && s.substr(0, 3) == "\xe2\x80\xa2") {   // •
        s = trim(s.substr(3));
    }
    if (s.empty() || !std::isdigit(static_cast<unsigned char>(s.front()))) return false;

    // dotted number
    std::vector<int> number;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        long v = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            v = v * 10 + (s[i] - '0');
            if (v > 1000000) return false;
            ++i;
        }
        number.push_back(static_cast<int>(v));
        if (i < s.size() && s[i] == '.' && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            ++i;
            continue;
        }
        break;
    }
    // optional "." or ")" right after the number
    if (i < s.size() && (s[i] == '.' || s[i] == ')')) ++i;
    if (i >= s.size() || !std::isspace(static_cast<unsigned char>(s[i]))) return false;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;

    std::string_view rest = s.substr(i);

    // strip trailing punctuation after the bracket, then expect `...[<digits>]`
    std::size_t end = rest.size();
    while (end > 0 && (rest[end - 1] == '.' || rest[end - 1] == ',' || rest[end - 1] == ';' ||
                       rest[end - 1] == ':' || rest[end - 1] == '!' || rest[end - 1] == ' '))
        --end;
    if (end == 0 || rest[end - 1] != ']') return false;
    std::size_t close = end - 1;
    std::size_t digits_end = close;
    std::size_t digits_begin = digits_end;
    while (digits_begin > 0 && std::isdigit(static_cast<unsigned char>(rest[digits_begin - 1])))
        --digits_begin;
    if (digits_begin == digits_end) return false;
    if (digits_begin == 0 || rest[digits_begin - 1] != '[') return false;

    long idx = 0;
    for (std::size_t k = digits_begin; k < digits_end; ++k) {
        idx = idx * 10 + (rest[k] - '0');
        if (idx > 100000000) return false;
    }
    std::string_view title = trim(rest.substr(0, digits_begin - 1));
    if (title.empty()) return false;

    out.number = std::move(number);
    out.title = std::string(title);
    out.start_index = static_cast<int>(idx);
    return true;
}

inline bool is_code_fence(std::string_view line) {
    std::string_view s = trim(line);
    return s.substr(0, 3) == "```" || s.substr(0, 3) == "~~~";
}

} // namespace detail

// ---------------------------------------------------------------------------
// Repair
// ---------------------------------------------------------------------------

// Turns raw model entries into a valid Toc. Applied in order: (1) clamp
// start_index to [1,n]; (2) stable sort by start_index; (3) collapse
// duplicate starts to the shallowest entry, keeping a first-child descent
// chain when one follows it (that pattern is valid: a subtopic may open where
// its parent opens); (4) coerce depth jumps > +1 down to predecessor depth+1;
// (5) prepend an "(untitled)" level-1 entry when the first start is > 1;
// (6) renumber.
inline std::pair<Toc, std::vector<std::string>> repair_toc(std::vector<RawTocEntry> raw, int n) {
    if (raw.empty())
        throw Error(Errc::EmptyInput, "no entries to repair");
    if (n < 1)
        throw Error(Errc::IndexOutOfRange, "sentence count must be >= 1");

    std::vector<std::string> repairs;
    auto describe = [](const RawTocEntry& e) {
        return "'" + e.title + "' [" + std::to_string(e.start_index) + "]";
    };

    // (1) clamp
    for (auto& e : raw) {
        if (e.start_index < 1) {
            repairs.push_back("clamped start of " + describe(e) + " to 1");
            e.start_index = 1;
        } else if (e.start_index > n) {
            repairs.push_back("clamped start of " + describe(e) + " to " + std::to_string(n));
            e.start_index = n;
        }
        // titles are trimmed at parse time, but repair may see hand-built input
        auto t = detail::trim(e.title);
        if (t.size() != e.title.size()) e.title = std::string(t);
        if (e.title.empty()) e.title = "(untitled)";
    }

    // (2) stable sort by start
    bool sorted = std::is_sorted(raw.begin(), raw.end(),
                                 [](const RawTocEntry& a, const RawTocEntry& b) {
                                     return a.start_index < b.start_index;
                                 });
    if (!sorted) {
        std::stable_sort(raw.begin(), raw.end(),
                         [](const RawTocEntry& a, const RawTocEntry& b) {
                             return a.start_index < b.start_index;
                         });
        repairs.push_back("reordered entries by start index");
    }

    // (3) collapse duplicate starts. Within a run of equal starts keep the
    // shallowest entry, then any immediately-following +1 descent chain.
    std::vector<RawTocEntry> kept;
    std::size_t i = 0;
    while (i < raw.size()) {
        std::size_t j = i;
        while (j < raw.size() && raw[j].start_index == raw[i].start_index) ++j;
        if (j - i == 1) {
            kept.push_back(std::move(raw[i]));
        } else {
            std::size_t best = i;
            for (std::size_t k = i; k < j; ++k)
                if (raw[k].number.size() < raw[best].number.size()) best = k;
            for (std::size_t k = i; k < best; ++k)
                repairs.push_back("dropped duplicate-start entry " + describe(raw[k]));
            kept.push_back(raw[best]);
            std::size_t chain_depth = raw[best].number.size();
            for (std::size_t k = best + 1; k < j; ++k) {
                if (raw[k].number.size() == chain_depth + 1) {
                    kept.push_back(raw[k]);
                    ++chain_depth;
                } else {
                    repairs.push_back("dropped duplicate-start entry " + describe(raw[k]));
                }
            }
        }
        i = j;
    }

    // (4) depth coercion; the implicit predecessor of the first entry has
    // depth 0, which forces the first entry to depth 1.
    std::vector<int> depths;
    depths.reserve(kept.size());
    int prev_depth = 0;
    for (auto& e : kept) {
        int d = static_cast<int>(e.number.size());
        if (d < 1) d = 1;
        if (d > prev_depth + 1) {
            repairs.push_back("coerced depth of " + describe(e) + " from " + std::to_string(d) +
                              " to " + std::to_string(prev_depth + 1));
            d = prev_depth + 1;
        }
        depths.push_back(d);
        prev_depth = d;
    }

    // (5) ensure coverage from sentence 1
    if (kept.front().start_index > 1) {
        RawTocEntry filler;
        filler.title = "(untitled)";
        filler.start_index = 1;
        kept.insert(kept.begin(), filler);
        depths.insert(depths.begin(), 1);
        repairs.push_back("prepended '(untitled)' entry at sentence 1");
    }

    // (6) renumber
    auto numbers = canonical_numbers(depths);
    Toc toc;
    toc.entries.reserve(kept.size());
    bool renumbered = false;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        if (kept[k].number != numbers[k] && !(kept[k].title == "(untitled)" && kept[k].number.empty()))
            renumbered = true;
        toc.entries.push_back(TocEntry{std::move(numbers[k]), std::move(kept[k].title),
                                       kept[k].start_index});
    }
    if (renumbered)
        repairs.push_back("renumbered entries to canonical dotted numbering");

    return {std::move(toc), std::move(repairs)};
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

// Accepts arbitrary model output: extracts entry lines, drops everything else
// with a per-line reason, and repairs the result into a valid Toc.
inline std::pair<Toc, ParseDiagnostics> parse_toc(std::string_view text, int n) {
    if (n < 1)
        throw Error(Errc::IndexOutOfRange, "sentence count must be >= 1");

    ParseDiagnostics diag;
    std::vector<RawTocEntry> raw;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        ++line_no;
        if (!detail::trim(line).empty()) {
            RawTocEntry entry;
            if (detail::is_code_fence(line)) {
                diag.dropped_lines.emplace_back(line_no, "code fence");
            } else if (detail::parse_toc_line(line, entry)) {
                entry.source_line = line_no;
                raw.push_back(std::move(entry));
            } else {
                diag.dropped_lines.emplace_back(line_no, "no entry pattern");
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    if (raw.empty())
        throw Error(Errc::Unparseable, "no line matches the entry pattern");

    auto [toc, repairs] = repair_toc(std::move(raw), n);
    diag.repairs = std::move(repairs);

    if (!validate_toc(toc).empty())
        throw Error(Errc::AllEntriesInvalid, "repair did not produce a valid toc: " +
                                                 validate_toc(toc).front());
    return {std::move(toc), std::move(diag)};
}

// ---------------------------------------------------------------------------
// JSON mirror: recursive entries {title, start_index, children[]}
// ---------------------------------------------------------------------------

namespace detail {

inline void toc_subtree_to_json(const Toc& toc, std::size_t& i, int depth, nlohmann::json& out) {
    while (i < toc.entries.size() && toc.entries[i].depth() == depth) {
        nlohmann::json node;
        node["title"] = toc.entries[i].title;
        node["start_index"] = toc.entries[i].start_index;
        node["children"] = nlohmann::json::array();
        ++i;
        if (i < toc.entries.size() && toc.entries[i].depth() == depth + 1)
            toc_subtree_to_json(toc, i, depth + 1, node["children"]);
        out.push_back(std::move(node));
    }
}

inline void toc_subtree_from_json(const nlohmann::json& nodes, int depth,
                                  std::vector<TocEntry>& entries, std::vector<int>& depths) {
    for (const auto& node : nodes) {
        if (!node.contains("title") || !node.contains("start_index"))
            throw Error(Errc::ParseError, "toc json node needs title and start_index");
        TocEntry e;
        e.title = node["title"].get<std::string>();
        e.start_index = node["start_index"].get<int>();
        entries.push_back(std::move(e));
        depths.push_back(depth);
        if (node.contains("children"))
            toc_subtree_from_json(node["children"], depth + 1, entries, depths);
    }
}

} // namespace detail

inline nlohmann::json toc_to_json(const Toc& toc) {
    nlohmann::json root;
    root["entries"] = nlohmann::json::array();
    std::size_t i = 0;
    detail::toc_subtree_to_json(toc, i, 1, root["entries"]);
    return root;
}

inline Toc toc_from_json(const nlohmann::json& j) {
    const nlohmann::json& nodes = j.is_array() ? j : j.at("entries");
    Toc toc;
    std::vector<int> depths;
    detail::toc_subtree_from_json(nodes, 1, toc.entries, depths);
    if (toc.entries.empty())
        throw Error(Errc::EmptyInput, "toc json has no entries");
    auto numbers = canonical_numbers(depths);
    for (std::size_t k = 0; k < toc.entries.size(); ++k)
        toc.entries[k].number = std::move(numbers[k]);
    return toc;
}

} // namespace tocseg
