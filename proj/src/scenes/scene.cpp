#include "lain/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace lain {

namespace {

using Rgb = std::array<float, 3>;

// Cue marks use full-value colours, which object fills (value 0.75) never reach.
constexpr std::array<Rgb, 9> kCuePalette{{{1.0f, 1.0f, 1.0f},
                                          {1.0f, 0.0f, 0.0f},
                                          {0.0f, 1.0f, 0.0f},
                                          {0.0f, 0.0f, 1.0f},
                                          {1.0f, 1.0f, 0.0f},
                                          {0.0f, 1.0f, 1.0f},
                                          {1.0f, 0.0f, 1.0f},
                                          {0.0f, 0.0f, 0.0f},
                                          {0.5f, 0.5f, 0.5f}}};
constexpr Rgb kHumanBody{0.84375f, 0.625f, 0.4375f};
constexpr Rgb kHumanHead{0.4375f, 0.296875f, 0.1953125f};

float quantize(double v) { return static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 256.0) / 256.0); }

Rgb object_color(std::size_t cls, std::size_t num_classes) {
    // Evenly spaced hues at fixed saturation/value; never reaches the cue colour.
    const double h = static_cast<double>(cls) / static_cast<double>(num_classes) * 6.0;
    const double s = 0.7, v = 0.75;
    const double c = v * s;
    const double x = c * (1 - std::abs(std::fmod(h, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h) % 6) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    const double m = v - c;
    return {quantize(r + m), quantize(g + m), quantize(b + m)};
}

struct PixelBox {
    int x1, y1, x2, y2;  // half-open
    bool overlaps(const PixelBox& o, int margin) const {
        return x1 < o.x2 + margin && o.x1 < x2 + margin && y1 < o.y2 + margin && o.y1 < y2 + margin;
    }
};

PixelBox to_pixels(const Box& b, std::size_t size) {
    const double s = static_cast<double>(size);
    return {static_cast<int>(std::lround(b.x1 * s)), static_cast<int>(std::lround(b.y1 * s)),
            static_cast<int>(std::lround(b.x2 * s)), static_cast<int>(std::lround(b.y2 * s))};
}

Box to_normalized(const PixelBox& p, std::size_t size) {
    const double s = static_cast<double>(size);
    return {p.x1 / s, p.y1 / s, p.x2 / s, p.y2 / s};
}

void fill(Scene& scene, const PixelBox& b, const Rgb& color) {
    const int size = static_cast<int>(scene.image_size);
    for (int y = std::max(0, b.y1); y < std::min(size, b.y2); ++y)
        for (int x = std::max(0, b.x1); x < std::min(size, b.x2); ++x)
            for (int ch = 0; ch < 3; ++ch) scene.pixels[(static_cast<std::size_t>(y) * size + x) * 3 + ch] = color[ch];
}

PixelBox cue_square(const PixelBox& obj, const CueRule& rule, double cue_scale, std::size_t patch) {
    const int w = obj.x2 - obj.x1, h = obj.y2 - obj.y1;
    int side = static_cast<int>(std::lround(cue_scale * std::min(w, h)));
    side = std::clamp(side, 2, static_cast<int>(patch));
    const double cx = obj.x1 + rule.rel_x * w, cy = obj.y1 + rule.rel_y * h;
    int x1 = static_cast<int>(std::lround(cx - side / 2.0));
    int y1 = static_cast<int>(std::lround(cy - side / 2.0));
    x1 = std::clamp(x1, obj.x1, obj.x2 - side);
    y1 = std::clamp(y1, obj.y1, obj.y2 - side);
    return {x1, y1, x1 + side, y1 + side};
}

void draw_entity(Scene& scene, const PixelBox& b, std::size_t cls, std::size_t human, std::size_t num_classes) {
    if (cls == human) {
        fill(scene, b, kHumanBody);
        fill(scene, {b.x1, b.y1, b.x2, b.y1 + std::max(2, (b.y2 - b.y1) / 4)}, kHumanHead);
        return;
    }
    const Rgb c = object_color(cls, num_classes);
    const Rgb border{c[0] * 0.625f, c[1] * 0.625f, c[2] * 0.625f};
    fill(scene, b, border);
    fill(scene, {b.x1 + 1, b.y1 + 1, b.x2 - 1, b.y2 - 1}, c);
}

}  // namespace

std::vector<CueRule> default_cue_rules(std::size_t num_verbs, std::size_t palette) {
    static constexpr std::array<std::array<double, 2>, 9> lattice{
        {{0.2, 0.2}, {0.8, 0.2}, {0.2, 0.8}, {0.8, 0.8}, {0.5, 0.2}, {0.5, 0.8}, {0.2, 0.5}, {0.8, 0.5}, {0.5, 0.5}}};
    if (num_verbs > lattice.size())
        throw std::invalid_argument("default cue grammar supports at most 9 verbs");
    if (palette == 0 || palette > kCuePalette.size())
        throw std::invalid_argument("cue palette size must lie in [1, 9]");
    std::vector<CueRule> rules;
    for (std::size_t v = 0; v < num_verbs; ++v) rules.push_back({lattice[v][0], lattice[v][1], v % palette});
    return rules;
}

void SceneSpec::validate() const {
    if (!space) throw std::invalid_argument("scene spec has no category space");
    if (patch_size == 0 || image_size % patch_size != 0)
        throw std::invalid_argument("image_size must be divisible by patch_size");
    if (image_size < 32) throw std::invalid_argument("image_size must be at least 32");
    if (rules.size() != space->num_verbs()) throw std::invalid_argument("every verb needs exactly one cue rule");
    for (const auto& r : rules)
        if (r.colour >= kCuePalette.size()) throw std::invalid_argument("cue colour index out of range");
    if (frequency_weights.size() != space->num_categories())
        throw std::invalid_argument("frequency_weights length does not match category count");
    double total = 0.0;
    for (double w : frequency_weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("frequency weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("frequency weights sum to zero");
    if (cue_scale <= 0.0 || cue_scale > 0.5) throw std::invalid_argument("cue_scale must lie in (0, 0.5]");
    if (interact_prob < 0.0 || interact_prob > 1.0) throw std::invalid_argument("interact_prob must lie in [0, 1]");
}

SceneSpec make_scene_spec(std::shared_ptr<const CategorySpace> space) {
    SceneSpec spec;
    spec.rules = default_cue_rules(space->num_verbs());
    spec.frequency_weights.assign(space->num_categories(), 1.0);
    spec.space = std::move(space);
    return spec;
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto& space = *spec.space;
    const int size = static_cast<int>(spec.image_size);
    const std::size_t human = space.human_object_index();
    std::mt19937_64 rng(seed);
    auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    for (int restart = 0; restart < 50; ++restart) {
        Scene scene;
        scene.seed = seed;
        scene.image_size = spec.image_size;
        scene.pixels.resize(spec.image_size * spec.image_size * 3);
        for (auto& p : scene.pixels) p = static_cast<float>((16 + uniform_int(0, 24)) / 256.0);

        std::vector<PixelBox> placed;
        auto free_at = [&](const PixelBox& b) {
            if (b.x1 < 0 || b.y1 < 0 || b.x2 > size || b.y2 > size) return false;
            return std::none_of(placed.begin(), placed.end(), [&](const PixelBox& o) { return b.overlaps(o, 1); });
        };
        auto place_free = [&](int w, int h) -> std::optional<PixelBox> {
            for (int t = 0; t < 200; ++t) {
                int x = uniform_int(0, size - w), y = uniform_int(0, size - h);
                PixelBox b{x, y, x + w, y + h};
                if (free_at(b)) return b;
            }
            return std::nullopt;
        };
        auto human_size = [&] { return std::pair{uniform_int(12, 18), uniform_int(18, 26)}; };
        auto object_size = [&] { return std::pair{uniform_int(12, 18), uniform_int(12, 18)}; };

        struct Pending {
            PixelBox box;
            std::size_t cls;
        };
        std::vector<Pending> entities;
        struct Link {
            std::size_t human_entity, object_entity, category;
        };
        std::vector<Link> links;
        bool failed = false;

        const std::size_t n_humans = spec.max_humans == 0 ? 0 : static_cast<std::size_t>(uniform_int(1, static_cast<int>(spec.max_humans)));
        std::discrete_distribution<std::size_t> pick_category(spec.frequency_weights.begin(), spec.frequency_weights.end());
        std::bernoulli_distribution interacts(spec.interact_prob);
        std::size_t interacting_objects = 0;

        for (std::size_t hidx = 0; hidx < n_humans && !failed; ++hidx) {
            auto [hw, hh] = human_size();
            auto hbox = place_free(hw, hh);
            if (!hbox) {
                failed = true;
                break;
            }
            placed.push_back(*hbox);
            entities.push_back({*hbox, human});
            const std::size_t h_entity = entities.size() - 1;
            if (interacting_objects >= spec.max_objects || !interacts(rng)) continue;

            const std::size_t cat = pick_category(rng);
            const std::size_t obj_cls = space.categories()[cat].object;
            auto [ow, oh] = obj_cls == human ? human_size() : object_size();
            std::optional<PixelBox> obox;
            for (int t = 0; t < 200 && !obox; ++t) {
                const int gap = uniform_int(1, 2);
                const bool right = uniform_int(0, 1) == 1;
                const int x = right ? hbox->x2 + gap : hbox->x1 - gap - ow;
                const int y = uniform_int(hbox->y1 - oh / 2, hbox->y2 - oh / 2);
                PixelBox b{x, y, x + ow, y + oh};
                if (free_at(b)) obox = b;
            }
            if (!obox) continue;  // no room next to this human; leave it non-interacting
            placed.push_back(*obox);
            entities.push_back({*obox, obj_cls});
            links.push_back({h_entity, entities.size() - 1, cat});
            ++interacting_objects;
        }
        if (failed) continue;

        if (spec.max_objects > interacting_objects) {
            const int extra = uniform_int(0, static_cast<int>(spec.max_objects - interacting_objects));
            const auto objs = space.interaction_objects();
            for (int e = 0; e < extra; ++e) {
                const std::size_t cls = objs[static_cast<std::size_t>(uniform_int(0, static_cast<int>(objs.size()) - 1))];
                auto [ow, oh] = cls == human ? human_size() : object_size();
                if (auto b = place_free(ow, oh)) {
                    placed.push_back(*b);
                    entities.push_back({*b, cls});
                }
            }
        }

        for (const auto& e : entities) {
            draw_entity(scene, e.box, e.cls, human, space.num_objects());
            scene.entities.push_back({to_normalized(e.box, spec.image_size), e.cls});
        }
        for (const auto& l : links) {
            const auto& cat = space.categories()[l.category];
            fill(scene, cue_square(entities[l.object_entity].box, spec.rules[cat.verb], spec.cue_scale, spec.patch_size),
                 kCuePalette[spec.rules[cat.verb].colour]);
            HoiInstance inst;
            inst.human_entity = l.human_entity;
            inst.object_entity = l.object_entity;
            inst.human_box = scene.entities[l.human_entity].box;
            inst.object_box = scene.entities[l.object_entity].box;
            inst.object_class = cat.object;
            inst.verb = cat.verb;
            inst.category = l.category;
            scene.instances.push_back(inst);
        }
        return scene;
    }
    throw GenerationError("could not place entities for seed " + std::to_string(seed) + " after 50 attempts");
}

std::optional<std::size_t> extract_verb(const Scene& scene, const Box& object_box, const SceneSpec& spec) {
    const auto obj = to_pixels(object_box, scene.image_size);
    const int size = static_cast<int>(scene.image_size);
    std::optional<std::size_t> found;
    for (std::size_t v = 0; v < spec.rules.size(); ++v) {
        const auto sq = cue_square(obj, spec.rules[v], spec.cue_scale, spec.patch_size);
        bool complete = true;
        for (int y = sq.y1; y < sq.y2 && complete; ++y)
            for (int x = sq.x1; x < sq.x2 && complete; ++x) {
                if (x < 0 || y < 0 || x >= size || y >= size) {
                    complete = false;
                    break;
                }
                for (int ch = 0; ch < 3; ++ch)
                    if (scene.pixels[(static_cast<std::size_t>(y) * size + x) * 3 + ch] != kCuePalette[spec.rules[v].colour][ch])
                        complete = false;
            }
        if (complete) {
            if (found) return std::nullopt;  // ambiguous
            found = v;
        }
    }
    return found;
}

void mask_cue(Scene& scene, const HoiInstance& instance, const SceneSpec& spec) {
    const auto obj = to_pixels(instance.object_box, scene.image_size);
    const auto sq = cue_square(obj, spec.rules.at(instance.verb), spec.cue_scale, spec.patch_size);
    const auto human = spec.space->human_object_index();
    const Rgb c = instance.object_class == human ? kHumanBody : object_color(instance.object_class, spec.space->num_objects());
    fill(scene, sq, c);
}

std::vector<Detection> simulate_detections(const Scene& scene, const DetectorNoise& noise, std::size_t num_classes,
                                           std::uint64_t seed) {
    for (double p : {noise.class_flip, noise.miss})
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("detector probabilities must lie in [0, 1]");
    const std::size_t D = noise.feature_dim;

    // Fixed tables shared by every scene with the same feature_seed.
    std::mt19937_64 table_rng(noise.feature_seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> class_table(num_classes * D);
    for (auto& v : class_table) v = unit(table_rng) / std::sqrt(static_cast<double>(D));
    std::vector<double> geometry(4 * D);
    for (auto& v : geometry) v = unit(table_rng);

    std::mt19937_64 rng(seed);
    std::bernoulli_distribution missed(noise.miss);
    std::bernoulli_distribution flipped(noise.class_flip);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::normal_distribution<double> feat_noise(0.0, 1.0);

    std::vector<Detection> out;
    for (const auto& e : scene.entities) {
        // Every random draw happens regardless of the outcome so streams stay aligned.
        const bool drop = missed(rng);
        std::array<double, 4> j{};
        for (auto& v : j) v = noise.box_jitter * jitter(rng);
        const bool flip = num_classes > 1 && flipped(rng);
        const std::size_t other = std::uniform_int_distribution<std::size_t>(0, num_classes > 1 ? num_classes - 2 : 0)(rng);
        std::vector<double> fnoise(D);
        for (auto& v : fnoise) v = noise.feature_noise * feat_noise(rng);
        if (drop) continue;

        Detection d;
        d.box = clamp_unit({e.box.x1 + j[0], e.box.y1 + j[1], e.box.x2 + j[2], e.box.y2 + j[3]});
        constexpr double min_extent = 1e-3;
        if (d.box.x2 - d.box.x1 < min_extent) {
            const double c = std::clamp(0.5 * (d.box.x1 + d.box.x2), min_extent, 1.0 - min_extent);
            d.box.x1 = c - min_extent / 2;
            d.box.x2 = c + min_extent / 2;
        }
        if (d.box.y2 - d.box.y1 < min_extent) {
            const double c = std::clamp(0.5 * (d.box.y1 + d.box.y2), min_extent, 1.0 - min_extent);
            d.box.y1 = c - min_extent / 2;
            d.box.y2 = c + min_extent / 2;
        }
        d.class_index = flip ? (other >= e.class_index ? other + 1 : other) : e.class_index;
        const double jmag = std::sqrt(j[0] * j[0] + j[1] * j[1] + j[2] * j[2] + j[3] * j[3]);
        d.confidence = std::clamp(1.0 - jmag - (flip ? noise.flip_penalty : 0.0), 0.0, 1.0);

        const std::array<double, 4> geo{0.5 * (d.box.x1 + d.box.x2), 0.5 * (d.box.y1 + d.box.y2), d.box.width(),
                                        d.box.height()};
        d.feature.resize(D);
        for (std::size_t c = 0; c < D; ++c) {
            double g = 0.0;
            for (std::size_t a = 0; a < 4; ++a) g += geo[a] * geometry[a * D + c];
            d.feature[c] = class_table[d.class_index * D + c] + 0.1 * g + fnoise[c];
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<SceneRecord> filter_annotations(const std::vector<SceneRecord>& records, const ZeroShotSplit& split) {
    std::vector<SceneRecord> out = records;
    for (auto& r : out)
        std::erase_if(r.scene.instances, [&](const HoiInstance& i) { return split.is_unseen(i.category); });
    return out;
}

FrequencyTable count_frequencies(const std::vector<SceneRecord>& records, std::size_t num_categories) {
    FrequencyTable counts(num_categories, 0);
    for (const auto& r : records)
        for (const auto& i : r.scene.instances) counts.at(i.category)++;
    return counts;
}

}  // namespace lain
