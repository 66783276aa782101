#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lain/fnv.hpp"
#include "lain/training.hpp"

using namespace lain;

namespace {

std::shared_ptr<const CategorySpace> space3() {
    return std::make_shared<CategorySpace>(
        CategorySpace::cartesian({"person", "cup", "ball", "book"}, {"hold", "lift", "kick"}, 0));
}

const Box kH{0.1, 0.1, 0.4, 0.6};
const Box kO{0.42, 0.3, 0.6, 0.5};

Detection det(Box b, std::size_t cls) { return {b, cls, 0.9, std::vector<double>(32, 0.1)}; }

HoiInstance inst(const CategorySpace& s, Box h, Box o, std::size_t obj, std::size_t verb) {
    HoiInstance i;
    i.human_box = h;
    i.object_box = o;
    i.object_class = obj;
    i.verb = verb;
    i.category = *s.category_index(obj, verb);
    return i;
}

std::uint64_t frozen_checksum(const LainModel& m) {
    Fnv1a f;
    for (const auto& [name, t] : m.params().entries())
        if (!t.requires_grad()) {
            f.str(name);
            auto d = t.data();
            f.bytes(d.data(), d.size() * sizeof(double));
        }
    return f.h;
}

std::uint64_t all_checksum(const LainModel& m) {
    Fnv1a f;
    for (const auto& [name, t] : m.params().entries()) {
        auto d = t.data();
        f.bytes(d.data(), d.size() * sizeof(double));
    }
    return f.h;
}

std::vector<SceneRecord> toy_corpus(std::shared_ptr<const CategorySpace> space, std::size_t n, std::uint64_t base) {
    auto spec = make_scene_spec(space);
    DetectorNoise noise{.box_jitter = 0.01, .class_flip = 0.0, .miss = 0.0, .feature_noise = 0.05};
    std::vector<SceneRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = generate_scene(spec, base + i);
        out.push_back({s, simulate_detections(s, noise, space->num_objects(), base + i)});
    }
    return out;
}

ModelConfig tiny() {
    ModelConfig c;
    c.layers = 1;
    return c;
}

}  // namespace

TEST(AssignLabels, ExactMatchIsPositive) {
    auto s = space3();
    std::vector<Detection> d{det(kH, 0), det(kO, 1)};
    auto pairs = enumerate_pairs(d, 0);
    auto y = assign_labels(d, pairs, {inst(*s, kH, kO, 1, 2)}, *s, nullptr, 0.5);
    ASSERT_EQ(y.shape(), (Shape{1, 9}));
    for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(y.at(c), c == *s->category_index(1, 2) ? 1.0 : 0.0);
}

TEST(AssignLabels, LowObjectIouIsNegative) {
    auto s = space3();
    const Box shifted{0.42 + 0.18 * 0.6, 0.3, 0.6 + 0.18 * 0.6, 0.5};
    ASSERT_LT(iou(shifted, kO), 0.5);
    std::vector<Detection> d{det(kH, 0), det(shifted, 1)};
    auto y = assign_labels(d, enumerate_pairs(d, 0), {inst(*s, kH, kO, 1, 0)}, *s, nullptr, 0.5);
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(AssignLabels, WrongObjectClassIsNegative) {
    auto s = space3();
    std::vector<Detection> d{det(kH, 0), det(kO, 2)};
    auto y = assign_labels(d, enumerate_pairs(d, 0), {inst(*s, kH, kO, 1, 0)}, *s, nullptr, 0.5);
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(AssignLabels, TwoVerbsGiveRowSumTwo) {
    auto s = space3();
    std::vector<Detection> d{det(kH, 0), det(kO, 1)};
    auto y = assign_labels(d, enumerate_pairs(d, 0), {inst(*s, kH, kO, 1, 0), inst(*s, kH, kO, 1, 1)}, *s, nullptr,
                           0.5);
    double sum = 0.0;
    for (double v : y.data()) sum += v;
    EXPECT_EQ(sum, 2.0);
}

TEST(AssignLabels, InstanceOrderInvariant) {
    auto s = space3();
    std::vector<Detection> d{det(kH, 0), det(kO, 1), det({0.7, 0.1, 0.9, 0.6}, 0)};
    std::vector<HoiInstance> a{inst(*s, kH, kO, 1, 0), inst(*s, {0.7, 0.1, 0.9, 0.6}, kO, 1, 2)};
    std::vector<HoiInstance> b{a[1], a[0]};
    auto pairs = enumerate_pairs(d, 0);
    auto ya = assign_labels(d, pairs, a, *s, nullptr, 0.5);
    auto yb = assign_labels(d, pairs, b, *s, nullptr, 0.5);
    EXPECT_EQ(std::vector<double>(ya.data().begin(), ya.data().end()),
              std::vector<double>(yb.data().begin(), yb.data().end()));
}

TEST(AssignLabels, UnseenColumnsAreZeroOverCorpus) {
    auto s = space3();
    auto split = build_split(*s, SplitSetting::UC, nullptr, 3, 4);
    for (const auto& r : toy_corpus(s, 30, 70)) {
        auto pairs = enumerate_pairs(r.detections, 0);
        auto y = assign_labels(r.detections, pairs, r.scene.instances, *s, &split, 0.5);
        for (std::size_t i = 0; i < pairs.count(); ++i)
            for (std::size_t c = 0; c < s->num_categories(); ++c)
                if (split.is_unseen(c)) EXPECT_EQ(y.at(i * s->num_categories() + c), 0.0);
    }
}

TEST(AdamW, ZeroLearningRateLeavesParameters) {
    auto s = space3();
    auto recs = toy_corpus(s, 2, 10);
    LainModel m(tiny(), s);
    m.randomize_gates(0.1, 3);
    const auto before = all_checksum(m);
    AdamW opt(m.params(), 0.0, 1e-4);
    TrainConfig tc;
    auto split = build_split(*s, SplitSetting::FULL, nullptr, 0, 0);
    auto r = train_step(m, recs[0], split, opt, tc);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_EQ(all_checksum(m), before);
}

TEST(AdamW, FirstStepMovesEachWeightByLr) {
    ParamStore ps;
    auto w = ps.add("w", Tensor::from({3}, {1.0, -2.0, 0.5}), true);
    auto loss = ops::sum(ops::mul(w, Tensor::from({3}, {3.0, -1.0, 0.0})));
    loss.backward();
    AdamW opt(ps, 0.1, 0.0);
    opt.step();
    EXPECT_NEAR(w.data()[0], 1.0 - 0.1 * 3.0 / (3.0 + 1e-8), 1e-12);
    EXPECT_NEAR(w.data()[1], -2.0 + 0.1 / (1.0 + 1e-8), 1e-12);
    EXPECT_EQ(w.data()[2], 0.5);
}

TEST(AdamW, DecoupledDecayWithoutGradient) {
    ParamStore ps;
    auto w = ps.add("w", Tensor::from({1}, {2.0}), true);
    AdamW opt(ps, 0.1, 0.5);
    opt.step();
    EXPECT_DOUBLE_EQ(w.data()[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(TrainStep, NonFiniteNamesTheTensor) {
    auto s = space3();
    auto recs = toy_corpus(s, 1, 11);
    LainModel m(tiny(), s);
    m.text.log_tau.mutable_data()[0] = std::nan("");
    AdamW opt(m.params(), 1e-3, 0.0);
    auto split = build_split(*s, SplitSetting::FULL, nullptr, 0, 0);
    EXPECT_THROW(train_step(m, recs[0], split, opt, TrainConfig{}), InvalidStateError);

    LainModel m2(tiny(), s);
    m2.text.prompt_offset.mutable_data()[0] = std::numeric_limits<double>::infinity();
    AdamW opt2(m2.params(), 1e-3, 0.0);
    try {
        train_step(m2, recs[0], split, opt2, TrainConfig{});
        FAIL() << "expected NonFiniteError";
    } catch (const NonFiniteError& e) {
        EXPECT_NE(std::string(e.what()).find("text.prompt_offset"), std::string::npos) << e.what();
    }
}

TEST(TrainStep, EmptyPairsAreSkipped) {
    auto s = space3();
    auto recs = toy_corpus(s, 1, 12);
    recs[0].detections.clear();
    LainModel m(tiny(), s);
    AdamW opt(m.params(), 1e-3, 0.0);
    auto split = build_split(*s, SplitSetting::FULL, nullptr, 0, 0);
    EXPECT_TRUE(train_step(m, recs[0], split, opt, TrainConfig{}).skipped);
    EXPECT_EQ(opt.steps(), 0u);
}

TEST(Train, ZeroEpochsKeepInitialization) {
    auto s = space3();
    auto recs = toy_corpus(s, 3, 20);
    LainModel m(tiny(), s);
    const auto before = all_checksum(m);
    TrainConfig tc;
    tc.epochs = 0;
    auto r = train(m, recs, recs, build_split(*s, SplitSetting::FULL, nullptr, 0, 0), tc);
    EXPECT_TRUE(r.log.empty());
    EXPECT_EQ(all_checksum(m), before);
    EXPECT_EQ(training_log_csv(r.log), "epoch,mean_loss,val_mAP_seen,val_mAP_unseen,wall_seconds\n");
}

TEST(Train, ToyRunLowersLossKeepsFrozenWeightsAndLogsEachEpoch) {
    auto s = std::make_shared<CategorySpace>(
        CategorySpace::cartesian({"person", "cup", "ball", "book"}, {"hold", "lift", "kick"}, 0));
    auto recs = toy_corpus(s, 100, 1000);
    auto val = toy_corpus(s, 10, 5000);
    LainModel m(tiny(), s);
    const auto frozen = frozen_checksum(m);
    TrainConfig tc;
    tc.epochs = 5;
    std::size_t calls = 0;
    auto r = train(m, recs, val, build_split(*s, SplitSetting::UC, nullptr, 2, 1), tc,
                   [&](const EpochLog&) { ++calls; });
    ASSERT_EQ(r.log.size(), 5u);
    EXPECT_EQ(calls, 5u);
    EXPECT_LT(r.log.back().mean_loss, r.log.front().mean_loss);
    EXPECT_EQ(frozen_checksum(m), frozen);
    EXPECT_GE(r.best_epoch, 1u);
    auto csv = training_log_csv(r.log);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Train, Deterministic) {
    auto s = space3();
    auto recs = toy_corpus(s, 8, 300);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 9;
    auto split = build_split(*s, SplitSetting::FULL, nullptr, 0, 0);
    LainModel a(tiny(), s), b(tiny(), s);
    train(a, recs, {}, split, tc);
    train(b, recs, {}, split, tc);
    EXPECT_EQ(all_checksum(a), all_checksum(b));
}
