#include <catch2/catch_amalgamated.hpp>

#include "tocseg/core.hpp"
#include "test_support.hpp"

using namespace tocseg;

namespace {

Toc make_toc(const std::vector<std::pair<std::vector<int>, int>>& numbered_starts) {
    Toc toc;
    for (const auto& [number, start] : numbered_starts)
        toc.entries.push_back(TocEntry{number, "t" + std::to_string(start), start});
    return toc;
}

} // namespace

TEST_CASE("toc_to_hierseg basic two-level outline") {
    // 1 @1, 2 @5, 2.1 @5, 2.2 @9 with n=12
    Toc toc = make_toc({{{1}, 1}, {{2}, 5}, {{2, 1}, 5}, {{2, 2}, 9}});
    auto hs = toc_to_hierseg(toc, 12);
    REQUIRE(hs.depth() == 2);
    CHECK(hs.levels[0].positions == std::vector<int>{4});
    CHECK(hs.levels[1].positions == std::vector<int>{4, 8});
    CHECK(validate_hierseg(hs).empty());

    // ownership-sweep oracle agrees level by level
    for (int l = 1; l <= hs.depth(); ++l)
        CHECK(hs.levels[l - 1] == testsup::toc_level_by_ownership(toc, 12, l));
}

TEST_CASE("toc_to_hierseg single entry has one empty level") {
    Toc toc = make_toc({{{1}, 1}});
    auto hs = toc_to_hierseg(toc, 7);
    REQUIRE(hs.depth() == 1);
    CHECK(hs.levels[0].positions.empty());
    CHECK(hs.levels[0].n == 7);
}

TEST_CASE("toc_to_hierseg depth-3 entry appears only at level 3 and deeper") {
    Toc toc = make_toc({{{1}, 1},
                        {{2}, 4},
                        {{2, 1}, 4},
                        {{2, 2}, 7},
                        {{2, 2, 1}, 7},
                        {{2, 2, 2}, 10}});
    auto hs = toc_to_hierseg(toc, 14);
    REQUIRE(hs.depth() == 3);
    CHECK(hs.levels[0].positions == std::vector<int>{3});
    CHECK(hs.levels[1].positions == std::vector<int>{3, 6});
    CHECK(hs.levels[2].positions == std::vector<int>{3, 6, 9});
    // the 2.2.2 start (boundary 9) is absent from levels 1-2, present at 3
    CHECK_FALSE(std::binary_search(hs.levels[1].positions.begin(),
                                   hs.levels[1].positions.end(), 9));
}

TEST_CASE("toc_to_hierseg errors") {
    SECTION("invalid toc: first entry not at sentence 1") {
        Toc toc = make_toc({{{1}, 3}});
        CHECK_THROWS_MATCHES(toc_to_hierseg(toc, 5), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::InvalidToc;
                             }));
    }
    SECTION("start index beyond n") {
        Toc toc = make_toc({{{1}, 1}, {{2}, 9}});
        CHECK_THROWS_MATCHES(toc_to_hierseg(toc, 5), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.code() == Errc::IndexOutOfRange;
                             }));
    }
    SECTION("inconsistent numbering") {
        Toc toc = make_toc({{{1}, 1}, {{3}, 4}});
        CHECK_FALSE(validate_toc(toc).empty());
    }
}

TEST_CASE("hierseg_to_segments") {
    CHECK(hierseg_to_segments({5, {BoundarySet{5, {2}}}}, 1) ==
          std::vector<std::pair<int, int>>{{1, 2}, {3, 5}});
    CHECK(hierseg_to_segments({3, {BoundarySet{3, {}}}}, 1) ==
          std::vector<std::pair<int, int>>{{1, 3}});
    CHECK(hierseg_to_segments({10, {BoundarySet{10, {3, 7}}}}, 1) ==
          std::vector<std::pair<int, int>>{{1, 3}, {4, 7}, {8, 10}});
    CHECK_THROWS_MATCHES(hierseg_to_segments({5, {BoundarySet{5, {2}}}}, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::LevelOutOfRange;
                         }));
}

TEST_CASE("validate_hierseg") {
    CHECK(validate_hierseg({6, {BoundarySet{6, {2}}, BoundarySet{6, {2, 4}}}}).empty());

    auto persistence = validate_hierseg({6, {BoundarySet{6, {2, 4}}, BoundarySet{6, {2}}}});
    REQUIRE(persistence.size() == 1);
    CHECK(persistence[0].find("level 2") != std::string::npos);
    CHECK(persistence[0].find("position 4") != std::string::npos);

    auto range = validate_hierseg({5, {BoundarySet{5, {0}}}});
    REQUIRE(range.size() == 1);
    CHECK(range[0].find("position 0") != std::string::npos);
}

TEST_CASE("generated tocs: conversion properties") {
    testsup::Rng rng(0x5eedc0de);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 1 + rng.below(40);
        Toc toc = testsup::random_toc(rng, n);
        REQUIRE(validate_toc(toc).empty());

        auto hs = toc_to_hierseg(toc, n);
        CHECK(validate_hierseg(hs).empty());

        // oracle cross-check on every level
        for (int l = 1; l <= hs.depth(); ++l)
            CHECK(hs.levels[l - 1] == testsup::toc_level_by_ownership(toc, n, l));

        // monotone coarsening + boundary count and segment-length accounting
        for (int l = 1; l <= hs.depth(); ++l) {
            auto segments = hierseg_to_segments(hs, l);
            CHECK(static_cast<int>(segments.size()) == hs.levels[l - 1].segment_count());
            int covered = 0;
            for (auto [lo, hi] : segments) covered += hi - lo + 1;
            CHECK(covered == n);
            if (l > 1)
                CHECK(hs.levels[l - 2].segment_count() <= hs.levels[l - 1].segment_count());
        }
    }
}

TEST_CASE("canonical numbering rules") {
    // siblings count up, children restart at 1, returning ascends correctly
    auto numbers = canonical_numbers({1, 2, 2, 3, 1, 2});
    REQUIRE(numbers.size() == 6);
    CHECK(numbers[0] == std::vector<int>{1});
    CHECK(numbers[1] == std::vector<int>{1, 1});
    CHECK(numbers[2] == std::vector<int>{1, 2});
    CHECK(numbers[3] == std::vector<int>{1, 2, 1});
    CHECK(numbers[4] == std::vector<int>{2});
    CHECK(numbers[5] == std::vector<int>{2, 1});

    CHECK_THROWS_AS(canonical_numbers({2}), Error);
    CHECK_THROWS_AS(canonical_numbers({1, 3}), Error);
}
