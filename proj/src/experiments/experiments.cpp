#include "lain/experiments.hpp"

#include <cstdio>
#include <random>

namespace lain {

std::shared_ptr<const CategorySpace> make_space(const RunConfig& cfg) {
    std::vector<std::string> objects{cfg.get_text("human_name")};
    for (const auto& o : cfg.get_text_list("objects")) objects.push_back(o);
    return std::make_shared<CategorySpace>(CategorySpace::cartesian(objects, cfg.get_text_list("verbs"), 0));
}

SceneSpec make_scene_spec(const RunConfig& cfg, std::shared_ptr<const CategorySpace> space) {
    auto spec = make_scene_spec(std::move(space));
    spec.image_size = cfg.get_size("image_size");
    spec.patch_size = cfg.get_size("patch_size");
    spec.max_humans = cfg.get_size("max_humans");
    spec.max_objects = cfg.get_size("max_objects");
    spec.cue_scale = cfg.get_real("cue_scale");
    spec.interact_prob = cfg.get_real("interact_prob");
    spec.rules = default_cue_rules(spec.space->num_verbs(), cfg.get_size("cue_palette"));
    spec.validate();
    return spec;
}

DetectorNoise make_detector_noise(const RunConfig& cfg) {
    DetectorNoise n;
    n.box_jitter = cfg.get_real("box_jitter");
    n.class_flip = cfg.get_real("class_flip");
    n.miss = cfg.get_real("miss");
    n.feature_dim = cfg.get_size("d_det");
    n.feature_noise = cfg.get_real("feature_noise");
    n.feature_seed = cfg.get_seed("feature_seed");
    n.flip_penalty = cfg.get_real("flip_penalty");
    return n;
}

ModelConfig make_model_config(const RunConfig& cfg) {
    ModelConfig m;
    m.layers = cfg.get_size("layers");
    m.d_clip = cfg.get_size("d_clip");
    m.heads = cfg.get_size("heads");
    m.mlp_hidden = cfg.get_size("mlp_hidden");
    m.image_size = cfg.get_size("image_size");
    m.patch_size = cfg.get_size("patch_size");
    m.d_det = cfg.get_size("d_det");
    m.d_t = cfg.get_size("d_t");
    m.text_hidden = cfg.get_size("text_hidden");
    m.d_a = cfg.get_size("d_a");
    m.kernels = cfg.get_size_list("kernels");
    m.n_p = cfg.get_size("n_p");
    m.adapter_heads = cfg.get_size("adapter_heads");
    m.roi_size = cfg.get_size("roi_size");
    m.roi_samples = cfg.get_size("roi_samples");
    m.use_la = cfg.get_bool("use_la");
    m.use_ia = cfg.get_bool("use_ia");
    m.mask_image_tokens = cfg.get_bool("mask_image_tokens");
    m.la_init_gain = cfg.get_real("la_init_gain");
    m.ia_init_gain = cfg.get_real("ia_init_gain");
    m.ln_eps = cfg.get_real("ln_eps");
    m.backbone_seed = cfg.get_seed("backbone_seed");
    m.text_seed = cfg.get_seed("text_seed");
    m.adapter_seed = cfg.get_seed("adapter_seed");
    m.validate();
    return m;
}

TrainConfig make_train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.alpha = cfg.get_real("alpha");
    t.gamma = cfg.get_real("gamma_focal");
    t.iou_threshold = cfg.get_real("iou_threshold");
    t.lr = cfg.get_real("lr");
    t.weight_decay = cfg.get_real("weight_decay");
    t.beta1 = cfg.get_real("beta1");
    t.beta2 = cfg.get_real("beta2");
    t.adam_eps = cfg.get_real("adam_eps");
    t.epochs = cfg.get_size("epochs");
    t.seed = cfg.get_seed("train_seed");
    t.eval_lambda = cfg.get_real("lambda");
    t.validate();
    return t;
}

EvalOptions make_eval_options(const RunConfig& cfg) {
    EvalOptions e;
    e.lambda = cfg.get_real("lambda");
    e.iou_threshold = cfg.get_real("iou_threshold");
    const double s = cfg.get_real("band_small"), m = cfg.get_real("band_medium");
    if (!(s > 0.0 && s < m && m < 1.0)) throw ConfigError("size bands need 0 < band_small < band_medium < 1");
    e.bands = {{"S", 0.0, s}, {"M", s, m}, {"L", m, 1.0}};
    return e;
}

ZeroShotSplit make_split(const RunConfig& cfg, const CategorySpace& space, const std::vector<SceneRecord>& train) {
    const auto setting = parse_split_setting(cfg.get_text("split"));
    std::size_t universe = space.num_categories();
    if (setting == SplitSetting::UO) universe = space.num_objects() - 1;
    if (setting == SplitSetting::UV) universe = space.num_verbs();
    const double k_raw = cfg.get_real("split_k");
    const std::size_t k = setting == SplitSetting::FULL || k_raw == 0.0 ? 0 : resolve_split_count(k_raw, universe);
    FrequencyTable freq;
    if (setting == SplitSetting::RF_UC || setting == SplitSetting::NF_UC)
        freq = count_frequencies(train, space.num_categories());
    return build_split(space, setting, freq.empty() ? nullptr : &freq, k, cfg.get_seed("split_seed"));
}

std::vector<SceneRecord> generate_records(const SceneSpec& spec, const DetectorNoise& noise, std::size_t count,
                                          std::uint64_t first_seed) {
    std::vector<SceneRecord> out;
    out.reserve(count);
    const std::size_t classes = spec.space->num_objects();
    for (std::size_t i = 0; i < count; ++i) {
        auto scene = generate_scene(spec, first_seed + i);
        auto dets = simulate_detections(scene, noise, classes, (first_seed + i) ^ 0x9e3779b97f4a7c15ULL);
        out.push_back({std::move(scene), std::move(dets)});
    }
    return out;
}

DataSplits generate_data(const RunConfig& cfg, const CategorySpace& space) {
    auto shared = std::make_shared<CategorySpace>(space);
    const auto spec = make_scene_spec(cfg, shared);
    const auto noise = make_detector_noise(cfg);
    const std::uint64_t base = cfg.get_seed("data_seed") * 1000000ULL;
    DataSplits d;
    d.train = generate_records(spec, noise, cfg.get_size("train_scenes"), base);
    d.val = generate_records(spec, noise, cfg.get_size("val_scenes"), base + 400000);
    d.test = generate_records(spec, noise, cfg.get_size("test_scenes"), base + 700000);
    return d;
}

namespace {

Tensor rand_tensor(Shape s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(shape_numel(s));
    for (auto& x : v) x = u(rng);
    return Tensor::from(std::move(s), std::move(v), true);
}

}  // namespace

std::vector<GradSuiteItem> gradient_suite(const RunConfig& cfg) {
    const double tol = cfg.get_real("gradcheck_tolerance");
    GradCheckOptions opt{.eps = cfg.get_real("gradcheck_eps"), .seed = cfg.get_seed("gradcheck_seed")};
    std::vector<GradSuiteItem> out;
    auto record = [&](std::string name, GradCheckResult r) {
        const bool ok = r.passed(tol);
        out.push_back({std::move(name), std::move(r), ok});
    };

    std::mt19937_64 rng(opt.seed);
    {
        auto img = rand_tensor({5, 6, 3}, rng), ker = rand_tensor({3, 3, 3, 4}, rng);
        record("conv2d", grad_check([&] { return ops::conv2d(img, ker); }, {{"input", img}, {"kernel", ker}}, opt));
    }
    {
        auto x = rand_tensor({4, 6}, rng), g = rand_tensor({6}, rng), b = rand_tensor({6}, rng);
        record("layer_norm",
               grad_check([&] { return ops::layer_norm(x, g, b, 1e-6); }, {{"x", x}, {"gain", g}, {"bias", b}}, opt));
    }
    {
        auto q = rand_tensor({3, 8}, rng), k = rand_tensor({5, 8}, rng), v = rand_tensor({5, 8}, rng);
        record("attention", grad_check([&] { return ops::attention(q, k, v, 2); }, {{"q", q}, {"k", k}, {"v", v}}, opt));
    }
    {
        auto fm = rand_tensor({6, 6, 3}, rng);
        const Box box{0.12, 0.2, 0.71, 0.83};
        record("roi_align", grad_check([&] { return ops::roi_align(fm, box, 3, 2); }, {{"map", fm}}, opt));
    }
    {
        auto logits = rand_tensor({4, 5}, rng);
        std::vector<double> y(20);
        std::bernoulli_distribution coin(0.3);
        for (auto& v : y) v = coin(rng) ? 1.0 : 0.0;
        auto labels = Tensor::from({4, 5}, y);
        const double a = cfg.get_real("alpha"), gm = cfg.get_real("gamma_focal");
        record("focal_bce",
               grad_check([&] { return ops::focal_bce(ops::sigmoid(logits), labels, a, gm); }, {{"logits", logits}},
                          opt));
    }

    // Full loss on a two-pair scene with every adapter path active.
    auto space = make_space(cfg);
    LainModel model(make_model_config(cfg), space);
    model.randomize_gates(0.5, opt.seed);
    const auto& mc = model.config();
    std::vector<float> pixels(mc.image_size * mc.image_size * 3);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& p : pixels) p = static_cast<float>(byte(rng) / 256.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto feature = [&] {
        std::vector<double> f(mc.d_det);
        for (auto& x : f) x = n01(rng);
        return f;
    };
    const std::size_t human = space->human_object_index();
    std::vector<Detection> dets{{{0.1, 0.15, 0.4, 0.7}, human, 0.9, feature()},
                                {{0.42, 0.3, 0.62, 0.52}, 1, 0.8, feature()},
                                {{0.6, 0.6, 0.9, 0.95}, 2, 0.7, feature()}};
    HoiInstance inst;
    inst.human_box = dets[0].box;
    inst.object_box = dets[1].box;
    inst.object_class = 1;
    inst.verb = 0;
    inst.category = *space->category_index(1, 0);
    const auto tc = make_train_config(cfg);
    auto loss_fn = [&] {
        auto scored = score_scene(pixels, dets, model);
        auto y = assign_labels(dets, scored.pairs, {inst}, *space, nullptr, tc.iou_threshold);
        return ops::focal_bce(scored.scores, y, tc.alpha, tc.gamma);
    };
    GradCheckOptions full = opt;
    full.max_probes_per_tensor = cfg.get_size("gradcheck_probes");
    record("full_loss", grad_check(loss_fn, model.params().trainable(), full));
    return out;
}

namespace {

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double AblationRow::mean_unseen() const { return mean(unseen); }
double AblationRow::mean_seen() const { return mean(seen); }
double AblationRow::mean_full() const { return mean(full); }

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const DataSplits& data,
                                      const std::function<void(const std::string&)>& progress) {
    auto space = make_space(cfg);
    const auto split = make_split(cfg, *space, data.train);
    const auto eval_opts = make_eval_options(cfg);
    const std::size_t seeds = cfg.get_size("ablate_seeds");
    std::vector<AblationRow> rows;
    for (auto [la, ia] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
        AblationRow row;
        row.la = la;
        row.ia = ia;
        for (std::size_t s = 0; s < seeds; ++s) {
            auto mc = make_model_config(cfg);
            mc.use_la = la;
            mc.use_ia = ia;
            mc.adapter_seed += s;
            auto tc = make_train_config(cfg);
            tc.seed += s;
            LainModel model(mc, space);
            train(model, data.train, data.val, split, tc);
            auto rep = evaluate(model, data.test, split, eval_opts);
            row.unseen.push_back(rep.map_unseen.value_or(0.0));
            row.seen.push_back(rep.map_seen.value_or(0.0));
            row.full.push_back(rep.map_full.value_or(0.0));
            if (progress) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "LA=%d IA=%d seed=%zu unseen=%.4f seen=%.4f full=%.4f", la, ia, s,
                              row.unseen.back(), row.seen.back(), row.full.back());
                progress(buf);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "LA,IA,unseen,seen,full\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%d,%.10f,%.10f,%.10f\n", r.la, r.ia, r.mean_unseen(), r.mean_seen(),
                      r.mean_full());
        out += buf;
    }
    return out;
}

}  // namespace lain
