#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"

namespace tocseg {

// ---------------------------------------------------------------------------
// Transcript JSONL
// ---------------------------------------------------------------------------
// One object per sentence: {"i": int, "text": str, "start": s, "end": s}.
// An optional leading header object {"doc_id": ..., "speaker": ...} carries
// document metadata.

inline Transcript parse_transcript_jsonl(std::istream& in, const std::string& origin) {
    Transcript t;
    std::string line;
    int line_no = 0;
    int expected_index = 1;
    double prev_start = -1.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError, origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("i")) {
            if (line_no == 1 && (j.contains("doc_id") || j.contains("speaker"))) {
                if (j.contains("doc_id")) t.doc_id = j["doc_id"].get<std::string>();
                if (j.contains("speaker") && !j["speaker"].is_null())
                    t.speaker_id = j["speaker"].get<std::string>();
                continue;
            }
            throw Error(Errc::ParseError,
                        origin + ":" + std::to_string(line_no) + ": sentence object lacks 'i'");
        }
        Sentence s;
        try {
            s.index = j.at("i").get<int>();
            s.text = j.at("text").get<std::string>();
            s.start = j.at("start").get<double>();
            s.end = j.at("end").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError, origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (s.index != expected_index)
            throw Error(Errc::InvariantViolation,
                        origin + ": sentence index " + std::to_string(s.index) + " at line " +
                            std::to_string(line_no) + ", expected " + std::to_string(expected_index));
        if (s.end < s.start)
            throw Error(Errc::InvariantViolation,
                        origin + ": sentence " + std::to_string(s.index) + " has end < start");
        if (s.start < prev_start)
            throw Error(Errc::InvariantViolation,
                        origin + ": sentence " + std::to_string(s.index) +
                            " starts before its predecessor");
        prev_start = s.start;
        ++expected_index;
        t.sentences.push_back(std::move(s));
    }
    if (t.sentences.empty())
        throw Error(Errc::InvariantViolation, origin + ": transcript has no sentences");
    return t;
}

inline Transcript load_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::IoError, "cannot open transcript " + path);
    return parse_transcript_jsonl(in, path);
}

inline std::string transcript_to_jsonl(const Transcript& t) {
    std::ostringstream out;
    nlohmann::json header;
    header["doc_id"] = t.doc_id;
    if (t.speaker_id) header["speaker"] = *t.speaker_id;
    out << header.dump() << '\n';
    for (const auto& s : t.sentences) {
        nlohmann::json j;
        j["i"] = s.index;
        j["text"] = s.text;
        j["start"] = s.start;
        j["end"] = s.end;
        out << j.dump() << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Pauses
// ---------------------------------------------------------------------------

// pause_i = max(0, start(s_{i+1}) - end(s_i)), in seconds. Overlapping speech
// clamps to 0; length is always n-1.
inline std::vector<double> compute_pauses(const Transcript& t) {
    std::vector<double> pauses;
    for (std::size_t i = 0; i + 1 < t.sentences.size(); ++i)
        pauses.push_back(std::max(0.0, t.sentences[i + 1].start - t.sentences[i].end));
    return pauses;
}

// ---------------------------------------------------------------------------
// Interval annotations (AMI-style)
// ---------------------------------------------------------------------------

struct TopicInterval {
    std::string label;
    double start_time = 0.0;
    double end_time = 0.0;
};

// Index of the sentence whose start is nearest to `time`; ties resolve to the
// earlier sentence. Times outside the transcript clamp to the first/last
// sentence.
inline int snap_time_to_sentence(double time, const Transcript& t) {
    const auto& ss = t.sentences;
    auto it = std::lower_bound(ss.begin(), ss.end(), time,
                               [](const Sentence& s, double v) { return s.start < v; });
    if (it == ss.begin()) return 1;
    if (it == ss.end()) return static_cast<int>(ss.size());
    double after = it->start - time;
    double before = time - std::prev(it)->start;
    return before <= after ? static_cast<int>(it - ss.begin())
                           : static_cast<int>(it - ss.begin()) + 1;
}

// Adapts interval-style topic annotations into a nested segmentation:
// time gaps between consecutive top-level intervals become "(filler)" topics,
// an interval starting strictly inside another becomes its subtopic, and each
// start snaps to the nearest sentence start. Partially overlapping intervals
// are coerced (the earlier one truncates where the later one starts) and the
// coercion is reported through `diagnostics`.
inline HierSegmentation intervals_to_hierseg(std::vector<TopicInterval> intervals,
                                             const Transcript& t,
                                             std::vector<std::string>* diagnostics = nullptr) {
    if (intervals.empty())
        throw Error(Errc::EmptyIntervals, "no topic intervals");
    for (const auto& iv : intervals)
        if (iv.end_time <= iv.start_time)
            throw Error(Errc::InvariantViolation, "interval '" + iv.label + "' has end <= start");

    auto note = [&](const std::string& msg) {
        if (diagnostics) diagnostics->push_back(msg);
    };

    if (!std::is_sorted(intervals.begin(), intervals.end(),
                        [](const TopicInterval& a, const TopicInterval& b) {
                            return a.start_time < b.start_time;
                        })) {
        std::stable_sort(intervals.begin(), intervals.end(),
                         [](const TopicInterval& a, const TopicInterval& b) {
                             return a.start_time < b.start_time;
                         });
        note("intervals were not sorted by start time; sorted");
    }

    double transcript_end = t.sentences.back().end;
    for (const auto& iv : intervals)
        if (iv.start_time > transcript_end)
            throw Error(Errc::UnmappableInterval,
                        "interval '" + iv.label + "' starts at " + std::to_string(iv.start_time) +
                            "s, beyond the transcript end " + std::to_string(transcript_end) + "s");

    struct Open {
        std::string label;
        double start;
        double eff_end;
        int depth;
        int top_slot;   // index into `tops` when depth == 1, else -1
    };
    struct Placed {
        double start;
        int depth;
    };
    struct TopSpan {
        double start;
        double end;
    };

    std::vector<Open> open;
    std::vector<Placed> placed;
    std::vector<TopSpan> tops;

    for (const auto& iv : intervals) {
        while (!open.empty() && open.back().eff_end <= iv.start_time) open.pop_back();
        // partial overlap: iv starts inside an open interval but outlives it;
        // the open interval truncates where iv starts.
        while (!open.empty() && iv.start_time < open.back().eff_end &&
               iv.end_time > open.back().eff_end) {
            note("truncated '" + open.back().label + "' at " + std::to_string(iv.start_time) +
                 "s; it overlaps '" + iv.label + "'");
            if (open.back().top_slot >= 0) tops[open.back().top_slot].end = iv.start_time;
            open.pop_back();
        }
        while (!open.empty() && open.back().eff_end <= iv.start_time) open.pop_back();

        int depth = 1;
        if (!open.empty() && iv.start_time > open.back().start &&
            iv.start_time < open.back().eff_end)
            depth = open.back().depth + 1;

        int slot = -1;
        if (depth == 1) {
            tops.push_back({iv.start_time, iv.end_time});
            slot = static_cast<int>(tops.size()) - 1;
        }
        placed.push_back({iv.start_time, depth});
        open.push_back({iv.label, iv.start_time, iv.end_time, depth, slot});
    }

    // fillers between consecutive top-level intervals
    for (std::size_t i = 0; i + 1 < tops.size(); ++i)
        if (tops[i + 1].start - tops[i].end > 1e-9) placed.push_back({tops[i].end, 1});

    int n = t.n();
    int max_depth = 1;
    for (const auto& p : placed) max_depth = std::max(max_depth, p.depth);

    HierSegmentation hs;
    hs.n = n;
    hs.levels.assign(max_depth, BoundarySet{n, {}});
    for (int l = 1; l <= max_depth; ++l) {
        std::vector<int> positions;
        for (const auto& p : placed) {
            if (p.depth > l) continue;
            int idx = snap_time_to_sentence(p.start, t);
            if (idx > 1) positions.push_back(idx - 1);
        }
        hs.levels[l - 1] = make_boundary_set(n, std::move(positions));
    }
    return hs;
}

// ---------------------------------------------------------------------------
// Corpus manifest and speaker splits
// ---------------------------------------------------------------------------

struct CorpusDocument {
    std::string doc_id;
    std::optional<std::string> speaker_id;
    std::string transcript_path;
    std::string reference_path;
};

struct CorpusIndex {
    std::string name;
    std::string protocol;   // "bootstrap", "loso", or empty (auto)
    std::vector<CorpusDocument> documents;
};

inline CorpusIndex corpus_index_from_json(const nlohmann::json& j) {
    CorpusIndex c;
    c.name = j.value("corpus", "");
    c.protocol = j.value("protocol", "");
    if (!j.contains("documents") || !j["documents"].is_array())
        throw Error(Errc::ParseError, "manifest lacks a 'documents' array");
    std::map<std::string, int> seen;
    for (const auto& d : j["documents"]) {
        CorpusDocument doc;
        doc.doc_id = d.at("doc_id").get<std::string>();
        if (d.contains("speaker") && !d["speaker"].is_null())
            doc.speaker_id = d["speaker"].get<std::string>();
        doc.transcript_path = d.value("transcript", "");
        doc.reference_path = d.value("reference", "");
        if (++seen[doc.doc_id] > 1)
            throw Error(Errc::InvariantViolation, "duplicate doc_id '" + doc.doc_id + "'");
        c.documents.push_back(std::move(doc));
    }
    return c;
}

inline CorpusIndex load_corpus_index(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::IoError, "cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, path + ": " + e.what());
    }
    return corpus_index_from_json(j);
}

struct LosoFold {
    std::string speaker;
    std::vector<std::string> train_doc_ids;
    std::vector<std::string> test_doc_ids;
};

// One fold per distinct speaker, sorted by speaker id; the fold's test set is
// exactly that speaker's documents.
inline std::vector<LosoFold> loso_splits(const CorpusIndex& c) {
    std::map<std::string, std::vector<std::string>> by_speaker;
    for (const auto& d : c.documents) {
        if (!d.speaker_id)
            throw Error(Errc::MissingSpeakerId, "document '" + d.doc_id + "' has no speaker");
        by_speaker[*d.speaker_id].push_back(d.doc_id);
    }
    if (by_speaker.size() < 2)
        throw Error(Errc::TooFewSpeakers,
                    "leave-one-speaker-out needs >= 2 speakers, got " +
                        std::to_string(by_speaker.size()));
    std::vector<LosoFold> folds;
    for (const auto& [speaker, test_ids] : by_speaker) {
        LosoFold fold;
        fold.speaker = speaker;
        fold.test_doc_ids = test_ids;
        for (const auto& [other, ids] : by_speaker)
            if (other != speaker)
                fold.train_doc_ids.insert(fold.train_doc_ids.end(), ids.begin(), ids.end());
        folds.push_back(std::move(fold));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Reference annotation files
// ---------------------------------------------------------------------------

inline std::vector<TopicInterval> intervals_from_json(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_array() ? j : j.at("intervals");
    std::vector<TopicInterval> out;
    for (const auto& node : arr) {
        TopicInterval iv;
        iv.label = node.value("label", "");
        iv.start_time = node.at("start_time").get<double>();
        iv.end_time = node.at("end_time").get<double>();
        out.push_back(std::move(iv));
    }
    return out;
}

inline nlohmann::json hierseg_to_json(const HierSegmentation& hs) {
    nlohmann::json j;
    j["n"] = hs.n;
    j["levels"] = nlohmann::json::array();
    for (const auto& level : hs.levels) j["levels"].push_back(level.positions);
    return j;
}

inline HierSegmentation hierseg_from_json(const nlohmann::json& j) {
    HierSegmentation hs;
    hs.n = j.at("n").get<int>();
    for (const auto& level : j.at("levels"))
        hs.levels.push_back(make_boundary_set(hs.n, level.get<std::vector<int>>()));
    auto violations = validate_hierseg(hs);
    if (!violations.empty())
        throw Error(Errc::InvariantViolation, violations.front());
    return hs;
}

} // namespace tocseg
