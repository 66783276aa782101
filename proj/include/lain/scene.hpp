#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lain/box.hpp"
#include "lain/category_space.hpp"

namespace lain {

struct Entity {
    Box box;
    std::size_t class_index = 0;
    friend bool operator==(const Entity&, const Entity&) = default;
};

// Ground-truth HOI instance (human box, object box, object class, verb).
struct HoiInstance {
    std::size_t human_entity = 0;
    std::size_t object_entity = 0;
    Box human_box;
    Box object_box;
    std::size_t object_class = 0;
    std::size_t verb = 0;
    std::size_t category = 0;
    friend bool operator==(const HoiInstance&, const HoiInstance&) = default;
};

struct Scene {
    std::uint64_t seed = 0;
    std::size_t image_size = 0;
    std::vector<float> pixels;  // image_size x image_size x 3, row-major, values in [0, 1]
    std::vector<Entity> entities;
    std::vector<HoiInstance> instances;
    friend bool operator==(const Scene&, const Scene&) = default;
};

struct Detection {
    Box box;
    std::size_t class_index = 0;
    double confidence = 1.0;
    std::vector<double> feature;
    friend bool operator==(const Detection&, const Detection&) = default;
};

// A contact mark in palette colour `colour` centred at (rel_x, rel_y) of the object box. The same
// placement grammar applies to every object class.
struct CueRule {
    double rel_x = 0.5;
    double rel_y = 0.5;
    std::size_t colour = 0;  // index into the fixed 9-entry cue palette
};

// Lattice positions in a fixed order; colours cycle through the first `palette` entries.
std::vector<CueRule> default_cue_rules(std::size_t num_verbs, std::size_t palette = 9);

struct SceneSpec {
    std::size_t image_size = 64;
    std::size_t patch_size = 8;
    std::size_t max_humans = 2;
    std::size_t max_objects = 3;  // non-human entities per scene
    std::shared_ptr<const CategorySpace> space;
    std::vector<CueRule> rules;             // one per verb
    double cue_scale = 0.25;                // cue side as a fraction of the smaller object side
    std::vector<double> frequency_weights;  // one per category
    double interact_prob = 0.85;

    // Throws std::invalid_argument when the spec is inconsistent.
    void validate() const;
};

SceneSpec make_scene_spec(std::shared_ptr<const CategorySpace> space);

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Deterministic in (spec, seed).
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

// Reads the verb back from the rendered cue on an object box, or nullopt when
// no single rule position carries a complete cue mark.
std::optional<std::size_t> extract_verb(const Scene& scene, const Box& object_box, const SceneSpec& spec);
// Paints over the cue of `instance` with the object's fill colour.
void mask_cue(Scene& scene, const HoiInstance& instance, const SceneSpec& spec);

struct DetectorNoise {
    double box_jitter = 0.0;   // Gaussian sigma on each normalized corner coordinate
    double class_flip = 0.0;   // probability of reporting a different class
    double miss = 0.0;         // probability of dropping an entity
    std::size_t feature_dim = 32;
    double feature_noise = 0.0;
    std::uint64_t feature_seed = 2024;  // fixes the class embedding and geometry tables
    double flip_penalty = 0.3;
};

// Oracle detector: one Detection per surviving entity, in entity order.
std::vector<Detection> simulate_detections(const Scene& scene, const DetectorNoise& noise, std::size_t num_classes,
                                           std::uint64_t seed);

struct SceneRecord {
    Scene scene;
    std::vector<Detection> detections;
    friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

// Copies of `records` whose training instances exclude unseen categories.
// Entities (and hence detections) are left untouched.
std::vector<SceneRecord> filter_annotations(const std::vector<SceneRecord>& records, const ZeroShotSplit& split);

// Per-category instance counts over `records`.
FrequencyTable count_frequencies(const std::vector<SceneRecord>& records, std::size_t num_categories);

}  // namespace lain
