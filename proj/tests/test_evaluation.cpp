#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eval_oracle.hpp"
#include "lain/evaluation.hpp"
#include "lain/training.hpp"

using namespace lain;

namespace {

Prediction pred(double score, Box h, Box o, std::size_t pair = 0) { return {0, pair, 0, score, h, o}; }

const Box kH{0.1, 0.1, 0.4, 0.6};
const Box kO{0.5, 0.5, 0.8, 0.9};
const Box kFar{0.0, 0.8, 0.1, 0.9};

}  // namespace

TEST(Iou, ClosedForms) {
    EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0, 1e-15);
    EXPECT_DOUBLE_EQ(iou(kH, kH), 1.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 0.1, 0.1}, {0.5, 0.5, 0.6, 0.6}), 0.0);
}

TEST(FuseScores, Examples) {
    std::vector<double> s{1.0};
    std::vector<double> h{0.5}, o{0.5};
    EXPECT_DOUBLE_EQ(fuse_scores(s, 1, h, o, 1.0)[0], 0.25);
    std::vector<double> s2{0.8}, h2{0.9}, o2{0.7};
    EXPECT_NEAR(fuse_scores(s2, 1, h2, o2, 2.8)[0], 0.8 * std::pow(0.9, 2.8) * std::pow(0.7, 2.8), 1e-15);
    EXPECT_NEAR(fuse_scores(s2, 1, h2, o2, 2.8)[0], 0.2194, 1e-4);
    EXPECT_EQ(fuse_scores(s2, 1, h2, o2, 0.0)[0], 0.8);
    EXPECT_THROW(fuse_scores(s2, 1, h2, o2, -1.0), std::invalid_argument);
    EXPECT_THROW(fuse_scores(s2, 2, h2, o2, 1.0), std::invalid_argument);
}

TEST(FuseScores, NeverIncreasesAndKeepsRowRanking) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 6, nc = 5;
    std::vector<double> s(n * nc), h(n), o(n);
    for (auto& v : s) v = u(rng);
    for (auto& v : h) v = u(rng);
    for (auto& v : o) v = u(rng);
    for (double lambda : {0.5, 1.0, 2.0, 4.0}) {
        auto f = fuse_scores(s, nc, h, o, lambda);
        for (std::size_t i = 0; i < n * nc; ++i) EXPECT_LE(f[i], s[i]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < nc; ++a)
                for (std::size_t b = 0; b < nc; ++b)
                    EXPECT_EQ(s[i * nc + a] < s[i * nc + b], f[i * nc + a] < f[i * nc + b]);
    }
}

TEST(AveragePrecision, HandExamples) {
    std::vector<GroundTruth> gt{{0, 0, kH, kO}};
    EXPECT_DOUBLE_EQ(*average_precision({pred(0.9, kH, kO)}, gt, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(*average_precision({pred(0.9, kFar, kO, 0), pred(0.5, kH, kO, 1)}, gt, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(*average_precision({}, gt, 0.5), 0.0);
    EXPECT_FALSE(average_precision({pred(0.9, kH, kO)}, {}, 0.5).has_value());
}

TEST(AveragePrecision, EachGtMatchedOnce) {
    std::vector<GroundTruth> gt{{0, 0, kH, kO}};
    EXPECT_DOUBLE_EQ(*average_precision({pred(0.9, kH, kO, 0), pred(0.8, kH, kO, 1)}, gt, 0.5), 1.0);
    std::vector<GroundTruth> two{{0, 0, kH, kO}, {0, 0, kH, kO}};
    EXPECT_DOUBLE_EQ(*average_precision({pred(0.9, kH, kO, 0)}, two, 0.5), 0.5);
}

TEST(AveragePrecision, MatchesBruteForceOracle) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto inst = oracle::random_instance(seed);
        auto got = average_precision(inst.preds, inst.gt, 0.5);
        auto want = oracle::brute_ap(inst.preds, inst.gt, 0.5);
        ASSERT_EQ(got.has_value(), want.has_value()) << seed;
        if (got) EXPECT_NEAR(*got, *want, 1e-9) << seed;
    }
}

TEST(AveragePrecision, BandedMatchesBruteForceOracle) {
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
        auto inst = oracle::random_instance(seed);
        for (auto role : {BoxRole::Human, BoxRole::Object})
            for (const auto& band : default_size_bands()) {
                auto got = average_precision_in_band(inst.preds, inst.gt, 0.5, role, band);
                oracle::BandFilter f{band.lo, band.hi, role == BoxRole::Human};
                auto want = oracle::brute_ap(inst.preds, inst.gt, 0.5, &f);
                ASSERT_EQ(got.has_value(), want.has_value()) << seed << " " << band.name;
                if (got) EXPECT_NEAR(*got, *want, 1e-9) << seed << " " << band.name;
            }
    }
}

TEST(AveragePrecision, InvariantToInputOrder) {
    for (std::uint64_t seed = 200; seed < 220; ++seed) {
        auto inst = oracle::random_instance(seed);
        auto base = average_precision(inst.preds, inst.gt, 0.5);
        std::mt19937_64 rng(seed);
        for (int k = 0; k < 3; ++k) {
            std::shuffle(inst.preds.begin(), inst.preds.end(), rng);
            auto again = average_precision(inst.preds, inst.gt, 0.5);
            ASSERT_EQ(base.has_value(), again.has_value());
            if (base) EXPECT_EQ(*base, *again);
        }
    }
}

TEST(SizeBands, SingleBandEqualsOverall) {
    SizeBand all{"all", 0.0, 1.0};
    for (std::uint64_t seed = 300; seed < 320; ++seed) {
        auto inst = oracle::random_instance(seed);
        auto a = average_precision(inst.preds, inst.gt, 0.5);
        auto b = average_precision_in_band(inst.preds, inst.gt, 0.5, BoxRole::Object, all);
        ASSERT_EQ(a.has_value(), b.has_value());
        if (a) EXPECT_NEAR(*a, *b, 1e-15);
    }
}

TEST(SizeBands, EmptyBandIsAbsent) {
    std::vector<GroundTruth> gt{{0, 0, {0.0, 0.0, 0.5, 0.5}, {0.5, 0.5, 1.0, 1.0}}};
    std::vector<Prediction> p{pred(0.9, gt[0].human, gt[0].object)};
    auto bands = default_size_bands();
    EXPECT_FALSE(average_precision_in_band(p, gt, 0.5, BoxRole::Human, bands[0]).has_value());
    EXPECT_FALSE(average_precision_in_band(p, gt, 0.5, BoxRole::Human, bands[1]).has_value());
    EXPECT_DOUBLE_EQ(*average_precision_in_band(p, gt, 0.5, BoxRole::Human, bands[2]), 1.0);
}

TEST(SizeBands, PartitionUnitInterval) {
    auto bands = default_size_bands();
    for (double a : {0.0, 0.005, 0.01, 0.05, 0.09, 0.5, 1.0}) {
        int hits = 0;
        for (const auto& b : bands) hits += b.contains(a);
        EXPECT_EQ(hits, 1) << a;
    }
}

TEST(Report, AggregatesAndFormats) {
    auto space = std::make_shared<CategorySpace>(CategorySpace::cartesian({"person", "cup"}, {"hold", "lift"}, 0));
    ZeroShotSplit split;
    split.unseen_mask = {false, true};
    Collected c;
    c.gt = {{0, 0, kH, kO}, {0, 1, kH, kO}};
    c.predictions = {{0, 0, 0, 0.9, kH, kO}, {0, 0, 1, 0.8, kFar, kO}};
    EvalOptions opts;
    auto rep = build_report(c, *space, split, opts);
    EXPECT_DOUBLE_EQ(*rep.map_seen, 1.0);
    EXPECT_DOUBLE_EQ(*rep.map_unseen, 0.0);
    EXPECT_DOUBLE_EQ(*rep.map_full, 0.5);
    EXPECT_EQ(rep.bands.size(), 6u);
    auto csv = report_csv(rep, *space);
    EXPECT_EQ(csv.rfind("category_name,set,AP,n_gt\n", 0), 0u);
    EXPECT_NE(csv.find("hold cup,seen,1.0000000000,1"), std::string::npos) << csv;
    EXPECT_NE(csv.find("mAP_full,0.5000000000"), std::string::npos);
    EXPECT_NE(csv.find("AP_S_human,absent"), std::string::npos);
    EXPECT_NE(report_json(rep, *space).find("\"mAP_full\": 0.5"), std::string::npos);
}

TEST(Evaluate, OverfitToyCorpusReachesHighFullMap) {
    auto space = std::make_shared<CategorySpace>(
        CategorySpace::cartesian({"person", "cup", "ball", "book"}, {"hold", "lift", "kick"}, 0));
    auto spec = make_scene_spec(space);
    spec.cue_scale = 0.45;
    std::vector<SceneRecord> recs;
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto scene = generate_scene(spec, 500 + s);
        recs.push_back({scene, simulate_detections(scene, DetectorNoise{}, space->num_objects(), s)});
    }
    ModelConfig mc;
    mc.layers = 1;
    LainModel model(mc, space);
    ZeroShotSplit split = build_split(*space, SplitSetting::FULL, nullptr, 0, 0);
    TrainConfig tc;
    tc.lr = 1e-2;
    tc.epochs = 100;
    train(model, recs, {}, split, tc);
    auto rep = evaluate(model, recs, split);
    ASSERT_TRUE(rep.map_full.has_value());
    EXPECT_GE(*rep.map_full, 0.9);
}
