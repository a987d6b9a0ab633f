#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "tocseg/ingest.hpp"
#include "test_support.hpp"

using namespace tocseg;
using Catch::Matchers::WithinAbs;

namespace {

Transcript uniform_transcript(int n, double step = 1.0) {
    Transcript t;
    t.doc_id = "doc";
    for (int i = 1; i <= n; ++i)
        t.sentences.push_back(Sentence{i, "s" + std::to_string(i), (i - 1) * step,
                                       (i - 1) * step + step * 0.8});
    return t;
}

// random forest of nested-or-disjoint intervals over the transcript span
void random_children(testsup::Rng& rng, double lo, double hi, int depth,
                     std::vector<TopicInterval>& out) {
    if (depth > 3 || hi - lo < 4.0) return;
    double cursor = lo;
    int kids = rng.below(3);
    for (int k = 0; k < kids; ++k) {
        double span = hi - cursor;
        if (span < 3.0) break;
        double start = cursor + 0.5 + 0.1 * rng.below(10);
        double end = start + 2.0 + 0.1 * rng.below(int((hi - start) * 10) + 1);
        if (end > hi) end = hi;
        if (end - start < 1.0) break;
        out.push_back({"d" + std::to_string(depth), start, end});
        random_children(rng, start, end, depth + 1, out);
        cursor = end + 0.2;
    }
}

} // namespace

TEST_CASE("load_transcript happy path with header") {
    std::istringstream in(R"({"doc_id": "meeting1", "speaker": "spk_a"}
{"i": 1, "text": "hello there", "start": 0.0, "end": 1.2}
{"i": 2, "text": "topic one", "start": 1.5, "end": 3.1}
{"i": 3, "text": "more words", "start": 3.72, "end": 5.0}
)");
    Transcript t = parse_transcript_jsonl(in, "test");
    CHECK(t.doc_id == "meeting1");
    REQUIRE(t.speaker_id.has_value());
    CHECK(*t.speaker_id == "spk_a");
    REQUIRE(t.n() == 3);
    CHECK(t.sentences[2].text == "more words");
}

TEST_CASE("load_transcript error paths") {
    SECTION("index gap names the failing sentence") {
        std::istringstream in(R"({"i": 1, "text": "a", "start": 0, "end": 1}
{"i": 3, "text": "b", "start": 1, "end": 2}
)");
        try {
            parse_transcript_jsonl(in, "test");
            FAIL("expected invariant violation");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::InvariantViolation);
            CHECK(std::string(e.what()).find("expected 2") != std::string::npos);
        }
    }
    SECTION("end before start") {
        std::istringstream in(R"({"i": 1, "text": "a", "start": 2.0, "end": 1.0}
)");
        CHECK_THROWS_MATCHES(parse_transcript_jsonl(in, "test"), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::InvariantViolation;
                             }));
    }
    SECTION("bad json carries the line number") {
        std::istringstream in("{\"i\": 1, \"text\": \"a\", \"start\": 0, \"end\": 1}\nnot json\n");
        try {
            parse_transcript_jsonl(in, "test");
            FAIL("expected parse error");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ParseError);
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
    SECTION("empty file") {
        std::istringstream in("");
        CHECK_THROWS_AS(parse_transcript_jsonl(in, "test"), Error);
    }
}

TEST_CASE("transcript jsonl round trip") {
    Transcript t = uniform_transcript(5);
    t.speaker_id = "spk";
    std::istringstream in(transcript_to_jsonl(t));
    Transcript back = parse_transcript_jsonl(in, "round");
    CHECK(back.doc_id == t.doc_id);
    CHECK(back.speaker_id == t.speaker_id);
    REQUIRE(back.n() == 5);
    CHECK(back.sentences[4].text == t.sentences[4].text);
}

TEST_CASE("compute_pauses") {
    Transcript t;
    t.doc_id = "p";
    t.sentences = {{1, "a", 0.0, 3.10}, {2, "b", 3.72, 5.0}, {3, "c", 4.8, 6.0}};
    auto pauses = compute_pauses(t);
    REQUIRE(pauses.size() == 2);
    CHECK_THAT(pauses[0], WithinAbs(0.62, 1e-12));   // 3.72 - 3.10
    CHECK(pauses[1] == 0.0);                         // overlap clamps to 0

    Transcript single;
    single.sentences = {{1, "x", 0.0, 1.0}};
    CHECK(compute_pauses(single).empty());
}

TEST_CASE("snap_time_to_sentence") {
    Transcript t = uniform_transcript(6);   // starts at 0,1,2,3,4,5
    CHECK(snap_time_to_sentence(3.0, t) == 4);    // exactly at start of s4
    CHECK(snap_time_to_sentence(1.7, t) == 3);    // nearer s3
    CHECK(snap_time_to_sentence(1.5, t) == 2);    // tie resolves earlier
    CHECK(snap_time_to_sentence(-2.0, t) == 1);   // clamp low
    CHECK(snap_time_to_sentence(99.0, t) == 6);   // clamp high
}

TEST_CASE("intervals_to_hierseg: gap between topics becomes a filler segment") {
    Transcript t = uniform_transcript(20);
    // topic [0,8), silence, topic [14,20)
    std::vector<TopicInterval> intervals = {{"A", 0.0, 8.0}, {"B", 14.0, 20.0}};
    auto hs = intervals_to_hierseg(intervals, t);
    REQUIRE(hs.depth() == 1);
    // boundaries: filler at snap(8)=9 -> position 8, B at snap(14)=15 -> 14
    CHECK(hs.levels[0].positions == std::vector<int>{8, 14});
    CHECK(hs.levels[0].segment_count() == 3);   // topic, filler, topic
    CHECK(validate_hierseg(hs).empty());
}

TEST_CASE("intervals_to_hierseg: nested interval opens a level-2 boundary") {
    Transcript t = uniform_transcript(20);
    std::vector<TopicInterval> intervals = {{"A", 0.0, 20.0}, {"B", 10.0, 16.0}};
    auto hs = intervals_to_hierseg(intervals, t);
    REQUIRE(hs.depth() == 2);
    CHECK(hs.levels[0].positions.empty());              // A covers everything
    CHECK(hs.levels[1].positions == std::vector<int>{10});
    CHECK(validate_hierseg(hs).empty());
}

TEST_CASE("intervals_to_hierseg: one covering interval, no boundaries") {
    Transcript t = uniform_transcript(7);
    auto hs = intervals_to_hierseg({{"all", 0.0, 7.0}}, t);
    REQUIRE(hs.depth() == 1);
    CHECK(hs.levels[0].positions.empty());
}

TEST_CASE("intervals_to_hierseg: partial overlap truncates the earlier interval") {
    Transcript t = uniform_transcript(20);
    std::vector<std::string> diags;
    // B starts inside A but outlives it
    auto hs = intervals_to_hierseg({{"A", 0.0, 12.0}, {"B", 8.0, 20.0}}, t, &diags);
    REQUIRE(hs.depth() == 1);
    CHECK(hs.levels[0].positions == std::vector<int>{8});
    REQUIRE_FALSE(diags.empty());
    CHECK(diags[0].find("truncated 'A'") != std::string::npos);
}

TEST_CASE("intervals_to_hierseg errors") {
    Transcript t = uniform_transcript(5);
    CHECK_THROWS_MATCHES(intervals_to_hierseg({}, t), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::EmptyIntervals;
                         }));
    CHECK_THROWS_MATCHES(intervals_to_hierseg({{"late", 99.0, 120.0}}, t), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::UnmappableInterval;
                         }));
}

TEST_CASE("random nested interval sets always produce valid segmentations") {
    testsup::Rng rng(0x1f2e);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 8 + rng.below(30);
        Transcript t = uniform_transcript(n);
        std::vector<TopicInterval> intervals;
        double cursor = 0.0;
        while (cursor < n - 4.0) {
            double start = cursor + rng.below(3) * 0.5;
            double end = start + 3.0 + rng.below(8);
            if (end > n) end = n;
            if (end - start < 1.0) break;
            intervals.push_back({"top", start, end});
            random_children(rng, start, end, 2, intervals);
            cursor = end + rng.below(4) * 0.7;
        }
        if (intervals.empty()) continue;
        std::stable_sort(intervals.begin(), intervals.end(),
                         [](const TopicInterval& a, const TopicInterval& b) {
                             return a.start_time < b.start_time;
                         });
        auto hs = intervals_to_hierseg(intervals, t);
        CHECK(validate_hierseg(hs).empty());
    }
}

TEST_CASE("loso_splits") {
    auto corpus_with_speakers = [](const std::vector<std::string>& speakers) {
        CorpusIndex c;
        for (std::size_t i = 0; i < speakers.size(); ++i) {
            CorpusDocument d;
            d.doc_id = "doc" + std::to_string(i);
            d.speaker_id = speakers[i];
            c.documents.push_back(d);
        }
        return c;
    };

    SECTION("five speakers give five folds") {
        auto folds = loso_splits(corpus_with_speakers({"a", "b", "c", "d", "e"}));
        CHECK(folds.size() == 5);
    }
    SECTION("one speaker is an error") {
        CHECK_THROWS_MATCHES(loso_splits(corpus_with_speakers({"a", "a"})), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::TooFewSpeakers;
                             }));
    }
    SECTION("missing speaker id") {
        CorpusIndex c = corpus_with_speakers({"a", "b"});
        c.documents[1].speaker_id.reset();
        CHECK_THROWS_MATCHES(loso_splits(c), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::MissingSpeakerId;
                             }));
    }
    SECTION("4 speakers over 96 docs partition the corpus") {
        CorpusIndex c;
        for (int i = 0; i < 96; ++i) {
            CorpusDocument d;
            d.doc_id = "doc" + std::to_string(i);
            d.speaker_id = "spk" + std::to_string(i % 4);
            c.documents.push_back(d);
        }
        auto folds = loso_splits(c);
        REQUIRE(folds.size() == 4);
        std::set<std::string> seen;
        for (const auto& fold : folds) {
            CHECK(fold.test_doc_ids.size() == 24);
            CHECK(fold.train_doc_ids.size() == 72);
            for (const auto& id : fold.test_doc_ids) CHECK(seen.insert(id).second);
        }
        CHECK(seen.size() == 96);   // union covers everything, pairwise disjoint
    }
}

TEST_CASE("corpus manifest parsing") {
    nlohmann::json j = {
        {"corpus", "fixture"},
        {"protocol", "loso"},
        {"documents",
         {{{"doc_id", "d1"}, {"speaker", "s1"}, {"transcript", "d1.jsonl"}, {"reference", "d1.json"}},
          {{"doc_id", "d2"}, {"transcript", "d2.jsonl"}, {"reference", "d2.json"}}}}};
    CorpusIndex c = corpus_index_from_json(j);
    CHECK(c.name == "fixture");
    CHECK(c.protocol == "loso");
    REQUIRE(c.documents.size() == 2);
    CHECK(c.documents[0].speaker_id.has_value());
    CHECK_FALSE(c.documents[1].speaker_id.has_value());

    j["documents"].push_back({{"doc_id", "d1"}});
    CHECK_THROWS_AS(corpus_index_from_json(j), Error);
}

TEST_CASE("hierseg json round trip") {
    testsup::Rng rng(0x99);
    for (int trial = 0; trial < 50; ++trial) {
        auto hs = testsup::random_hierseg(rng, 2 + rng.below(30), 1 + rng.below(4));
        CHECK(hierseg_from_json(hierseg_to_json(hs)) == hs);
    }
    CHECK_THROWS_AS(hierseg_from_json(nlohmann::json{{"n", 5}, {"levels", {{0}}}}), Error);
}
