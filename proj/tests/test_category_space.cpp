#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "lain/category_space.hpp"

using namespace lain;

namespace {

// 4 objects (index 0 is the human) x 3 verbs, human excluded -> 9 categories.
CategorySpace toy() { return CategorySpace::cartesian({"person", "cup", "ball", "book"}, {"hold", "lift", "kick"}, 0); }

void expect_partition(const ZeroShotSplit& s, std::size_t n) {
    auto seen = s.seen(), unseen = s.unseen();
    EXPECT_EQ(seen.size() + unseen.size(), n);
    std::set<std::size_t> all(seen.begin(), seen.end());
    for (auto u : unseen) EXPECT_TRUE(all.insert(u).second);
    EXPECT_EQ(all.size(), n);
}

}  // namespace

TEST(CategorySpace, CartesianExcludesHuman) {
    auto s = toy();
    EXPECT_EQ(s.num_categories(), 9u);
    EXPECT_FALSE(s.category_index(0, 0).has_value());
    EXPECT_EQ(s.category_name(*s.category_index(1, 0)), "hold cup");
    EXPECT_EQ(s.interaction_objects(), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(CategorySpace, RejectsBadNames) {
    EXPECT_THROW(CategorySpace({"a", "a"}, {"v"}, {}, 0), std::invalid_argument);
    EXPECT_THROW(CategorySpace({"a b"}, {"v"}, {}, 0), std::invalid_argument);
    EXPECT_THROW(CategorySpace({"a"}, {"v"}, {{1, 0}}, 0), std::invalid_argument);
    EXPECT_THROW(CategorySpace({"a"}, {"v"}, {}, 3), std::invalid_argument);
}

TEST(Split, RareFirstPicksLeastFrequent) {
    auto s = toy();
    FrequencyTable freq{9, 8, 7, 6, 5, 4, 3, 2, 1};
    auto split = build_split(s, SplitSetting::RF_UC, &freq, 3, 0);
    // Sort-by-count oracle.
    std::vector<std::size_t> idx(9);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return freq[a] < freq[b]; });
    std::vector<std::size_t> expected(idx.begin(), idx.begin() + 3);
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(split.unseen(), expected);
    EXPECT_EQ(split.unseen(), (std::vector<std::size_t>{6, 7, 8}));
}

TEST(Split, TiesBreakByIndex) {
    auto s = toy();
    FrequencyTable freq(9, 5);
    EXPECT_EQ(build_split(s, SplitSetting::RF_UC, &freq, 2, 0).unseen(), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(build_split(s, SplitSetting::NF_UC, &freq, 2, 0).unseen(), (std::vector<std::size_t>{0, 1}));
}

TEST(Split, RareAndFrequentAreDisjoint) {
    auto s = toy();
    FrequencyTable freq{3, 9, 1, 7, 5, 2, 8, 4, 6};
    for (std::size_t k = 1; 2 * k <= 9; ++k) {
        auto rf = build_split(s, SplitSetting::RF_UC, &freq, k, 0).unseen();
        auto nf = build_split(s, SplitSetting::NF_UC, &freq, k, 0).unseen();
        std::vector<std::size_t> both;
        std::set_intersection(rf.begin(), rf.end(), nf.begin(), nf.end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty()) << "k=" << k;
    }
}

TEST(Split, FrequencySplitsNeedTable) {
    EXPECT_THROW(build_split(toy(), SplitSetting::RF_UC, nullptr, 2, 0), std::invalid_argument);
}

TEST(Split, UnseenObjectClosure) {
    auto s = toy();
    auto split = split_from_unseen_objects(s, {3});
    std::vector<std::size_t> expected;
    for (std::size_t v = 0; v < 3; ++v) expected.push_back(*s.category_index(3, v));
    EXPECT_EQ(split.unseen(), expected);
    EXPECT_THROW(split_from_unseen_objects(s, {0}), std::invalid_argument);
}

TEST(Split, ZeroKIsFull) {
    auto s = toy();
    FrequencyTable freq(9, 1);
    for (auto setting : {SplitSetting::UC, SplitSetting::RF_UC, SplitSetting::NF_UC, SplitSetting::UO, SplitSetting::UV}) {
        auto split = build_split(s, setting, &freq, 0, 7);
        EXPECT_TRUE(split.unseen().empty());
        EXPECT_EQ(split.seen().size(), 9u);
    }
}

TEST(Split, UnseenCompositionsKeepCoverage) {
    auto s = toy();
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto split = build_split(s, SplitSetting::UC, nullptr, 4, seed);
        expect_partition(split, 9);
        EXPECT_EQ(split.unseen().size(), 4u);
        std::set<std::size_t> objs, verbs;
        for (auto c : split.seen()) {
            objs.insert(s.categories()[c].object);
            verbs.insert(s.categories()[c].verb);
        }
        EXPECT_EQ(objs.size(), 3u);
        EXPECT_EQ(verbs.size(), 3u);
    }
}

TEST(Split, UnsatisfiableCoverageFails) {
    // 1 object x 3 verbs: leaving any verb unseen breaks coverage.
    auto s = CategorySpace::cartesian({"person", "cup"}, {"a", "b", "c"}, 0);
    EXPECT_THROW(build_split(s, SplitSetting::UC, nullptr, 1, 0), SplitError);
}

TEST(Split, VerbAndObjectSplitsArePureClosures) {
    auto s = toy();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto uo = build_split(s, SplitSetting::UO, nullptr, 1, seed);
        auto uv = build_split(s, SplitSetting::UV, nullptr, 2, seed);
        expect_partition(uo, 9);
        expect_partition(uv, 9);
        std::set<std::size_t> objs, verbs;
        for (auto c : uo.unseen()) objs.insert(s.categories()[c].object);
        for (auto c : uv.unseen()) verbs.insert(s.categories()[c].verb);
        EXPECT_EQ(objs.size(), 1u);
        EXPECT_FALSE(objs.count(0));
        EXPECT_EQ(verbs.size(), 2u);
        EXPECT_EQ(uo.unseen(), split_from_unseen_objects(s, {objs.begin(), objs.end()}).unseen());
        EXPECT_EQ(uv.unseen(), split_from_unseen_verbs(s, {verbs.begin(), verbs.end()}).unseen());
    }
}

TEST(Split, PureInArguments) {
    auto s = toy();
    FrequencyTable freq{3, 9, 1, 7, 5, 2, 8, 4, 6};
    for (auto setting : {SplitSetting::UC, SplitSetting::RF_UC, SplitSetting::UO, SplitSetting::UV})
        EXPECT_EQ(build_split(s, setting, &freq, 2, 11).unseen_mask, build_split(s, setting, &freq, 2, 11).unseen_mask);
}

TEST(Split, KMustBeBelowUniverse) {
    auto s = toy();
    FrequencyTable freq(9, 1);
    EXPECT_THROW(build_split(s, SplitSetting::RF_UC, &freq, 9, 0), std::invalid_argument);
    EXPECT_THROW(build_split(s, SplitSetting::UO, nullptr, 3, 0), std::invalid_argument);
    EXPECT_THROW(build_split(s, SplitSetting::UV, nullptr, 3, 0), std::invalid_argument);
}

TEST(Split, ResolveFraction) {
    EXPECT_EQ(resolve_split_count(0.25, 8), 2u);
    EXPECT_EQ(resolve_split_count(3, 8), 3u);
    EXPECT_THROW(resolve_split_count(2.5, 8), std::invalid_argument);
    EXPECT_THROW(resolve_split_count(-1, 8), std::invalid_argument);
}

TEST(Split, TextRoundTrip) {
    auto s = toy();
    auto split = build_split(s, SplitSetting::UC, nullptr, 3, 5);
    auto text = serialize_split(split, s);
    auto back = parse_split(text, s);
    EXPECT_EQ(back.setting, SplitSetting::UC);
    EXPECT_EQ(back.seed, 5u);
    EXPECT_EQ(back.unseen_mask, split.unseen_mask);
    EXPECT_THROW(parse_split("setting=UC\nunseen cup dance\n", s), std::invalid_argument);
    EXPECT_THROW(parse_split("seed=1\n", s), std::invalid_argument);
}
