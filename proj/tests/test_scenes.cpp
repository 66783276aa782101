#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "lain/dataset_io.hpp"
#include "lain/scene.hpp"

using namespace lain;

namespace {

std::shared_ptr<const CategorySpace> toy_space() {
    return std::make_shared<CategorySpace>(
        CategorySpace::cartesian({"person", "cup", "ball", "book"}, {"hold", "lift", "kick"}, 0));
}

double iou(const Box& a, const Box& b) {
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

std::vector<SceneRecord> make_records(std::size_t n, std::uint64_t base) {
    auto spec = make_scene_spec(toy_space());
    DetectorNoise noise{.box_jitter = 0.02, .class_flip = 0.1, .miss = 0.1, .feature_noise = 0.05};
    std::vector<SceneRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto scene = generate_scene(spec, base + i);
        auto dets = simulate_detections(scene, noise, spec.space->num_objects(), base + 1000 + i);
        out.push_back({std::move(scene), std::move(dets)});
    }
    return out;
}

}  // namespace

TEST(Scenes, Deterministic) {
    auto spec = make_scene_spec(toy_space());
    for (std::uint64_t seed : {0u, 1u, 77u}) EXPECT_EQ(generate_scene(spec, seed), generate_scene(spec, seed));
    EXPECT_NE(generate_scene(spec, 1).pixels, generate_scene(spec, 2).pixels);
}

TEST(Scenes, NoHumansNoInstances) {
    auto spec = make_scene_spec(toy_space());
    spec.max_humans = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_TRUE(generate_scene(spec, seed).instances.empty());
}

TEST(Scenes, SpecValidation) {
    auto spec = make_scene_spec(toy_space());
    spec.patch_size = 7;
    EXPECT_THROW(generate_scene(spec, 0), std::invalid_argument);
    spec = make_scene_spec(toy_space());
    spec.rules.pop_back();
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec = make_scene_spec(toy_space());
    spec.frequency_weights.assign(9, 0.0);
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Scenes, WellFormed) {
    auto spec = make_scene_spec(toy_space());
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto s = generate_scene(spec, seed);
        ASSERT_EQ(s.pixels.size(), 64u * 64u * 3u);
        for (float p : s.pixels) {
            ASSERT_GE(p, 0.0f);
            ASSERT_LE(p, 1.0f);
        }
        for (const auto& e : s.entities) {
            EXPECT_GE(e.box.x1, 0.0);
            EXPECT_LE(e.box.x2, 1.0);
            EXPECT_LT(e.box.x1, e.box.x2);
            EXPECT_LT(e.box.y1, e.box.y2);
        }
        for (const auto& i : s.instances) {
            ASSERT_LT(i.object_entity, s.entities.size());
            EXPECT_EQ(s.entities[i.human_entity].class_index, 0u);
            EXPECT_EQ(s.entities[i.human_entity].box, i.human_box);
            EXPECT_EQ(s.entities[i.object_entity].box, i.object_box);
            EXPECT_EQ(s.entities[i.object_entity].class_index, i.object_class);
            EXPECT_EQ(*spec.space->category_index(i.object_class, i.verb), i.category);
        }
    }
}

TEST(Scenes, UniformFrequencies) {
    auto spec = make_scene_spec(toy_space());
    std::vector<double> counts(9, 0.0);
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
        for (const auto& i : generate_scene(spec, seed).instances) {
            counts[i.category] += 1.0;
            total += 1.0;
        }
    ASSERT_GT(total, 500.0);
    for (double c : counts) EXPECT_NEAR(c / total, 1.0 / 9.0, 0.3 / 9.0);
}

TEST(Scenes, CueDecidesVerb) {
    auto spec = make_scene_spec(toy_space());
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto s = generate_scene(spec, seed);
        for (const auto& i : s.instances) {
            auto v = extract_verb(s, i.object_box, spec);
            ASSERT_TRUE(v.has_value());
            EXPECT_EQ(*v, i.verb);
            auto masked = s;
            mask_cue(masked, i, spec);
            EXPECT_FALSE(extract_verb(masked, i.object_box, spec).has_value());
            ++checked;
        }
    }
    EXPECT_GT(checked, 100u);
}

TEST(Scenes, VerbsDifferOnlyInCuePixels) {
    // Same layout, different verb: re-rendering with swapped rules changes pixels.
    auto spec = make_scene_spec(toy_space());
    auto swapped = spec;
    std::swap(swapped.rules[0], swapped.rules[1]);
    std::size_t compared = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto a = generate_scene(spec, seed);
        auto b = generate_scene(swapped, seed);
        EXPECT_EQ(a.entities, b.entities);
        bool any_swapped_verb = false;
        for (const auto& i : a.instances) any_swapped_verb |= i.verb <= 1;
        if (any_swapped_verb) {
            EXPECT_NE(a.pixels, b.pixels);
            ++compared;
        }
    }
    EXPECT_GT(compared, 10u);
}

TEST(Scenes, EveryCategoryOccurs) {
    auto spec = make_scene_spec(toy_space());
    std::vector<bool> hit(9, false);
    for (std::uint64_t seed = 0; seed < 300; ++seed)
        for (const auto& i : generate_scene(spec, seed).instances) hit[i.category] = true;
    for (std::size_t c = 0; c < 9; ++c) EXPECT_TRUE(hit[c]) << c;
}

TEST(Detector, NoiselessOracle) {
    auto spec = make_scene_spec(toy_space());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = generate_scene(spec, seed);
        auto d = simulate_detections(s, {}, 4, seed);
        ASSERT_EQ(d.size(), s.entities.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_EQ(d[i].box, s.entities[i].box);
            EXPECT_DOUBLE_EQ(iou(d[i].box, s.entities[i].box), 1.0);
            EXPECT_EQ(d[i].class_index, s.entities[i].class_index);
            EXPECT_EQ(d[i].confidence, 1.0);
            EXPECT_EQ(d[i].feature.size(), 32u);
        }
    }
}

TEST(Detector, MissEverything) {
    auto s = generate_scene(make_scene_spec(toy_space()), 3);
    EXPECT_TRUE(simulate_detections(s, {.miss = 1.0}, 4, 0).empty());
    EXPECT_THROW(simulate_detections(s, {.miss = 1.5}, 4, 0), std::invalid_argument);
}

TEST(Detector, MissRateBinomial) {
    Scene s;
    s.image_size = 64;
    for (int i = 0; i < 10000; ++i) s.entities.push_back({{0.1, 0.1, 0.3, 0.3}, static_cast<std::size_t>(i % 4)});
    auto d = simulate_detections(s, {.miss = 0.3}, 4, 99);
    EXPECT_NEAR(static_cast<double>(d.size()) / 10000.0, 0.7, 0.02);
}

TEST(Detector, NoisyInvariants) {
    auto spec = make_scene_spec(toy_space());
    DetectorNoise noise{.box_jitter = 0.1, .class_flip = 0.5, .feature_noise = 0.2};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (const auto& d : simulate_detections(generate_scene(spec, seed), noise, 4, seed)) {
            EXPECT_LT(d.box.x1, d.box.x2);
            EXPECT_LT(d.box.y1, d.box.y2);
            EXPECT_GE(d.box.x1, 0.0);
            EXPECT_LE(d.box.y2, 1.0);
            EXPECT_GE(d.confidence, 0.0);
            EXPECT_LE(d.confidence, 1.0);
            EXPECT_LT(d.class_index, 4u);
        }
    }
}

TEST(Filter, UnseenVerbsRemoved) {
    auto space = toy_space();
    auto split = split_from_unseen_verbs(*space, {2});
    auto records = make_records(100, 500);
    auto filtered = filter_annotations(records, split);
    std::size_t kept = 0, before = 0;
    for (std::size_t r = 0; r < records.size(); ++r) {
        before += records[r].scene.instances.size();
        for (const auto& i : filtered[r].scene.instances) {
            EXPECT_NE(i.verb, 2u);
            ++kept;
        }
        EXPECT_EQ(filtered[r].scene.entities, records[r].scene.entities);
        EXPECT_EQ(filtered[r].detections, records[r].detections);
    }
    EXPECT_LT(kept, before);
    EXPECT_GT(kept, 0u);

    ZeroShotSplit none;
    none.unseen_mask.assign(space->num_categories(), false);
    EXPECT_EQ(filter_annotations(records, none), records);
}

TEST(Filter, CountFrequencies) {
    auto records = make_records(30, 9);
    auto freq = count_frequencies(records, 9);
    std::size_t total = 0, expected = 0;
    for (auto f : freq) total += f;
    for (const auto& r : records) expected += r.scene.instances.size();
    EXPECT_EQ(total, expected);
}

TEST(DatasetIo, RoundTripBothEncodings) {
    Dataset ds{0x1234abcdULL, make_records(10, 40)};
    for (auto enc : {PixelEncoding::Hex, PixelEncoding::Raw}) {
        auto back = parse_dataset(serialize_dataset(ds, enc));
        EXPECT_EQ(back.digest, ds.digest);
        EXPECT_EQ(back.records, ds.records);
    }
}

TEST(DatasetIo, EmptyDataset) {
    auto text = serialize_dataset({});
    auto back = parse_dataset(text);
    EXPECT_TRUE(back.records.empty());
}

TEST(DatasetIo, FileRoundTrip) {
    auto path = (std::filesystem::temp_directory_path() / "lain_ds_test.txt").string();
    Dataset ds{7, make_records(3, 1)};
    write_dataset(path, ds, PixelEncoding::Raw);
    EXPECT_EQ(read_dataset(path).records, ds.records);
    std::filesystem::remove(path);
    EXPECT_THROW(read_dataset(path), std::runtime_error);
}

TEST(DatasetIo, TruncationReportsOffset) {
    Dataset ds{1, make_records(3, 2)};
    for (auto enc : {PixelEncoding::Hex, PixelEncoding::Raw}) {
        auto text = serialize_dataset(ds, enc);
        std::mt19937_64 rng(5);
        for (int t = 0; t < 200; ++t) {
            auto cut = std::uniform_int_distribution<std::size_t>(0, text.size() - 1)(rng);
            try {
                parse_dataset(text.substr(0, cut));
                ADD_FAILURE() << "truncation at " << cut << " parsed";
            } catch (const DatasetParseError& e) {
                EXPECT_LE(e.offset(), cut);
            }
        }
    }
}

TEST(DatasetIo, CorruptFieldsReportOffset) {
    Dataset ds{1, make_records(1, 2)};
    auto text = serialize_dataset(ds);
    auto bad = text;
    bad[bad.find("SCENE ") + 6] = 'x';
    try {
        parse_dataset(bad);
        FAIL();
    } catch (const DatasetParseError& e) {
        EXPECT_EQ(e.offset(), text.find("SCENE ") + 6);
    }
    EXPECT_THROW(parse_dataset("LAINDS 2 digest=0 scenes=0 pixel_encoding=hex\n"), DatasetParseError);
    EXPECT_THROW(parse_dataset(text + "junk"), DatasetParseError);
}
