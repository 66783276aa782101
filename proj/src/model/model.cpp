#include "lain/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "lain/fnv.hpp"

namespace lain {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Tensor unit_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            v[r * cols + c] = n(rng);
            norm += v[r * cols + c] * v[r * cols + c];
        }
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < cols; ++c) v[r * cols + c] /= norm;
    }
    return Tensor::from({rows, cols}, std::move(v));
}

std::vector<std::uint8_t> block_mask(std::size_t nq, std::size_t nk, const std::vector<std::size_t>& q_block,
                                     const std::vector<std::size_t>& k_block) {
    std::vector<std::uint8_t> m(nq * nk, 0);
    for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < nk; ++j) m[i * nk + j] = q_block[i] == k_block[j];
    return m;
}

}  // namespace

void ModelConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("model config: ") + what);
    };
    need(layers >= 1, "layers must be positive");
    need(heads >= 1 && d_clip % heads == 0, "d_clip must be divisible by heads");
    need(adapter_heads >= 1 && d_a % adapter_heads == 0, "d_a must be divisible by adapter_heads");
    need(patch_size >= 1 && image_size % patch_size == 0, "image_size must be divisible by patch_size");
    need(d_a >= 1 && d_a < d_clip, "d_a must be below d_clip");
    need(!kernels.empty(), "kernel set is empty");
    for (auto k : kernels) need(k % 2 == 1, "kernel sizes must be odd");
    need(n_p >= 1, "n_p must be positive");
    need(roi_size >= 1 && roi_samples >= 1, "roi sizes must be positive");
    need(la_init_gain >= 0.0 && ia_init_gain >= 0.0, "init gains must be non-negative");
    need(d_det >= 1 && d_t >= 1 && text_hidden >= 1 && mlp_hidden >= 1, "widths must be positive");
}

std::string ModelConfig::canonical() const {
    std::string ks;
    for (std::size_t i = 0; i < kernels.size(); ++i) ks += (i ? "," : "") + std::to_string(kernels[i]);
    std::map<std::string, std::string> kv{
        {"adapter_heads", std::to_string(adapter_heads)},
        {"adapter_seed", std::to_string(adapter_seed)},
        {"backbone_seed", std::to_string(backbone_seed)},
        {"d_a", std::to_string(d_a)},
        {"d_clip", std::to_string(d_clip)},
        {"d_det", std::to_string(d_det)},
        {"d_t", std::to_string(d_t)},
        {"heads", std::to_string(heads)},
        {"ia_init_gain", fmt_double(ia_init_gain)},
        {"image_size", std::to_string(image_size)},
        {"kernels", ks},
        {"la_init_gain", fmt_double(la_init_gain)},
        {"layers", std::to_string(layers)},
        {"ln_eps", fmt_double(ln_eps)},
        {"mask_image_tokens", mask_image_tokens ? "true" : "false"},
        {"mlp_hidden", std::to_string(mlp_hidden)},
        {"n_p", std::to_string(n_p)},
        {"patch_size", std::to_string(patch_size)},
        {"roi_samples", std::to_string(roi_samples)},
        {"roi_size", std::to_string(roi_size)},
        {"text_hidden", std::to_string(text_hidden)},
        {"text_seed", std::to_string(text_seed)},
        {"use_ia", use_ia ? "true" : "false"},
        {"use_la", use_la ? "true" : "false"},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::uint64_t ModelConfig::digest() const {
    Fnv1a h;
    h.str(canonical());
    return h.h;
}

LainModel::LainModel(ModelConfig config, std::shared_ptr<const CategorySpace> space)
    : config_(std::move(config)), space_(std::move(space)) {
    config_.validate();
    if (!space_) throw std::invalid_argument("model needs a category space");
    build();
}

LainModel::LainModel(const LainModel& other) : LainModel(other.config_, other.space_) {
    params_.copy_values_from(other.params_);
    for (const auto& [name, t] : other.params_.entries()) {
        Tensor mine = params_.get(name);
        mine.set_requires_grad(t.requires_grad());
    }
}

void LainModel::build() {
    const auto& c = config_;
    const std::size_t g = c.grid();

    std::mt19937_64 rb(c.backbone_seed);
    patch_embed_w = params_.add_normal("backbone.patch.w", {c.patch_dim(), c.d_clip},
                                       1.0 / std::sqrt(static_cast<double>(c.patch_dim())), false, rb);
    patch_embed_b = params_.add_constant("backbone.patch.b", {c.d_clip}, 0.0, false);
    pos_embed = params_.add_normal("backbone.pos", {g * g, c.d_clip}, 0.1, false, rb);
    cls_token = params_.add_normal("backbone.cls", {1, c.d_clip}, 0.1, false, rb);
    for (std::size_t l = 0; l < c.layers; ++l) {
        const std::string p = "backbone.layer" + std::to_string(l);
        BackboneLayerWeights w;
        w.ln1 = nn::make_layer_norm(params_, p + ".ln1", c.d_clip, false);
        w.attn = nn::make_attention(params_, p + ".attn", c.d_clip, false, rb);
        w.ln2 = nn::make_layer_norm(params_, p + ".ln2", c.d_clip, false);
        w.mlp = nn::make_mlp(params_, p + ".mlp", c.d_clip, c.mlp_hidden, c.d_clip, false, rb);
        backbone.push_back(w);
    }

    std::mt19937_64 rt(c.text_seed);
    text.objects = params_.add("text.objects", unit_rows(space_->num_objects(), c.d_t, rt), false);
    text.verbs = params_.add("text.verbs", unit_rows(space_->num_verbs(), c.d_t, rt), false);
    text.mixer = nn::make_mlp(params_, "text.mixer", 2 * c.d_t, c.text_hidden, c.d_clip, false, rt);
    text.prompt_offset = params_.add_constant("text.prompt_offset", {2 * c.d_t}, 0.0, true);
    text.log_tau = params_.add_constant("text.log_tau", {1}, 0.0, true);

    std::mt19937_64 ra(c.adapter_seed);
    ho_mlp = nn::make_mlp(params_, "ho.mlp", 2 * c.d_det, c.d_clip, c.d_clip, true, ra);
    ho_geom = nn::make_linear(params_, "ho.geom", 8, c.d_clip, true, ra);
    for (std::size_t l = 0; l < c.layers; ++l) {
        if (c.use_la) {
            const double gain = c.la_init_gain;
            const std::string p = "la." + std::to_string(l);
            LaWeights w;
            w.down = nn::make_mlp(params_, p + ".down", c.d_clip, c.d_a, c.d_a, true, ra, gain);
            w.layout = nn::make_mlp(params_, p + ".layout", 5 + c.d_t, c.d_a, c.d_a, true, ra, gain);
            w.null_cell = params_.add_normal(p + ".null", {1, c.d_a}, 0.1, true, ra);
            w.fuse = nn::make_mlp(params_, p + ".fuse", c.d_a, c.d_a, c.d_a, true, ra, gain);
            w.ln = nn::make_layer_norm(params_, p + ".ln", c.d_a, true);
            for (auto k : c.kernels) {
                const std::string kp = p + ".conv" + std::to_string(k);
                w.conv.push_back(params_.add_normal(kp + ".w", {k, k, c.d_a, c.d_a},
                                                    gain / std::sqrt(static_cast<double>(k * k * c.d_a)), true, ra));
                w.conv_bias.push_back(params_.add_constant(kp + ".b", {c.d_a}, 0.0, true));
            }
            w.merge = nn::make_mlp(params_, p + ".merge", c.d_a, c.d_a, c.d_a, true, ra, gain);
            w.up = nn::make_mlp(params_, p + ".up", c.d_a, c.d_a, c.d_clip, true, ra, gain);
            w.gate = params_.add_constant(p + ".gate", {c.d_clip}, 0.0, true);
            la.push_back(std::move(w));
        }
        if (c.use_ia) {
            const double gain = c.ia_init_gain;
            const std::string p = "ia." + std::to_string(l);
            IaWeights w;
            w.region = nn::make_mlp(params_, p + ".region", c.d_clip, c.d_a, c.d_a, true, ra, gain);
            w.queries = params_.add_normal(p + ".queries", {c.n_p, c.d_a}, 1.0, true, ra);
            w.context = nn::make_attention(params_, p + ".context", c.d_a, true, ra, gain);
            w.pattern_h = nn::make_attention(params_, p + ".pattern_h", c.d_a, true, ra, gain);
            w.pattern_o = nn::make_attention(params_, p + ".pattern_o", c.d_a, true, ra, gain);
            w.token_down = nn::make_mlp(params_, p + ".token_down", c.d_clip, c.d_a, c.d_a, true, ra, gain);
            w.readout = nn::make_attention(params_, p + ".readout", c.d_a, true, ra, gain);
            w.fuse = nn::make_mlp(params_, p + ".fuse", 2 * c.d_a, c.d_a, c.d_clip, true, ra, gain);
            w.gate = params_.add_constant(p + ".gate", {c.d_clip}, 0.0, true);
            ia.push_back(std::move(w));
        }
    }
}

void LainModel::set_gates(double value) {
    for (auto& w : la) std::fill(w.gate.mutable_data().begin(), w.gate.mutable_data().end(), value);
    for (auto& w : ia) std::fill(w.gate.mutable_data().begin(), w.gate.mutable_data().end(), value);
}

void LainModel::randomize_gates(double stddev, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, stddev);
    for (auto& w : la)
        for (auto& v : w.gate.mutable_data()) v = n(rng);
    for (auto& w : ia)
        for (auto& v : w.gate.mutable_data()) v = n(rng);
}

HoPairIndex enumerate_pairs(const std::vector<Detection>& detections, std::size_t human_class) {
    HoPairIndex idx;
    for (std::size_t u = 0; u < detections.size(); ++u) {
        if (detections[u].class_index != human_class) continue;
        for (std::size_t v = 0; v < detections.size(); ++v)
            if (v != u) idx.pairs.emplace_back(u, v);
    }
    return idx;
}

std::pair<HoPairIndex, Tensor> construct_ho_tokens(const std::vector<Detection>& detections, const LainModel& model) {
    const auto& c = model.config();
    for (const auto& d : detections)
        if (d.feature.size() != c.d_det)
            throw std::invalid_argument("detection feature has length " + std::to_string(d.feature.size()) +
                                        ", expected " + std::to_string(c.d_det));
    auto pairs = enumerate_pairs(detections, model.space().human_object_index());
    const std::size_t n = pairs.count();
    if (n == 0) return {pairs, Tensor::zeros({0, c.d_clip})};
    std::vector<double> feat(n * 2 * c.d_det), geom(n * 8);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [u, v] = pairs.pairs[i];
        std::copy(detections[u].feature.begin(), detections[u].feature.end(), &feat[i * 2 * c.d_det]);
        std::copy(detections[v].feature.begin(), detections[v].feature.end(), &feat[i * 2 * c.d_det + c.d_det]);
        const Box& a = detections[u].box;
        const Box& b = detections[v].box;
        const double g[8] = {a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2};
        std::copy(g, g + 8, &geom[i * 8]);
    }
    auto f = Tensor::from({n, 2 * c.d_det}, std::move(feat));
    auto b = Tensor::from({n, 8}, std::move(geom));
    return {pairs, ops::add(nn::mlp(f, model.ho_mlp), nn::linear(b, model.ho_geom))};
}

ImageTokens embed_patches(std::span<const float> pixels, const LainModel& model) {
    const auto& c = model.config();
    const std::size_t S = c.image_size, P = c.patch_size, g = c.grid();
    if (pixels.size() != S * S * 3)
        throw std::invalid_argument("image has " + std::to_string(pixels.size()) + " values, expected " +
                                    std::to_string(S * S * 3));
    std::vector<double> rows(g * g * c.patch_dim());
    std::size_t k = 0;
    for (std::size_t pi = 0; pi < g; ++pi)
        for (std::size_t pj = 0; pj < g; ++pj)
            for (std::size_t y = 0; y < P; ++y)
                for (std::size_t x = 0; x < P; ++x)
                    for (std::size_t ch = 0; ch < 3; ++ch)
                        rows[k++] = pixels[((pi * P + y) * S + pj * P + x) * 3 + ch];
    auto patches = Tensor::from({g * g, c.patch_dim()}, std::move(rows));
    return {model.cls_token, ops::add(ops::linear(patches, model.patch_embed_w, model.patch_embed_b), model.pos_embed)};
}

std::vector<long> layout_assignment(const std::vector<Detection>& detections, std::size_t grid) {
    std::vector<long> out(grid * grid, -1);
    for (std::size_t i = 0; i < grid; ++i)
        for (std::size_t j = 0; j < grid; ++j) {
            const double x = (j + 0.5) / grid, y = (i + 0.5) / grid;
            long best = -1;
            for (std::size_t d = 0; d < detections.size(); ++d) {
                if (!detections[d].box.contains(x, y)) continue;
                if (best < 0 || detections[d].confidence > detections[best].confidence) best = static_cast<long>(d);
            }
            out[i * grid + j] = best;
        }
    return out;
}

Tensor build_layout_embedding(const std::vector<Detection>& detections, const LainModel& model, std::size_t layer) {
    const auto& c = model.config();
    const auto& w = model.la.at(layer);
    const std::size_t g = c.grid(), n = detections.size();
    auto assign = layout_assignment(detections, g);
    std::vector<std::size_t> rows(assign.size());
    for (std::size_t i = 0; i < assign.size(); ++i) rows[i] = assign[i] < 0 ? n : static_cast<std::size_t>(assign[i]);
    if (n == 0) return ops::gather_rows(w.null_cell, rows);

    const std::size_t in = 5 + c.d_t;
    std::vector<double> x(n * in);
    auto obj = model.text.objects.data();
    for (std::size_t d = 0; d < n; ++d) {
        const auto& det = detections[d];
        double* r = &x[d * in];
        r[0] = det.box.x1, r[1] = det.box.y1, r[2] = det.box.x2, r[3] = det.box.y2, r[4] = det.confidence;
        std::copy_n(&obj[det.class_index * c.d_t], c.d_t, r + 5);
    }
    auto emb = nn::mlp(Tensor::from({n, in}, std::move(x)), w.layout);
    return ops::gather_rows(ops::concat_rows({emb, w.null_cell}), rows);
}

Tensor locality_adapter(const Tensor& patches, const Tensor& layout, const LainModel& model, std::size_t layer) {
    const auto& c = model.config();
    const auto& w = model.la.at(layer);
    const std::size_t g = c.grid();
    auto ft = nn::mlp(patches, w.down);
    auto fh = nn::layer_norm(nn::mlp(ops::add(ft, layout), w.fuse), w.ln, c.ln_eps);
    auto grid = ops::reshape(fh, {g, g, c.d_a});
    Tensor acc;
    for (std::size_t k = 0; k < w.conv.size(); ++k) {
        auto lk = ops::add_rowwise(ops::reshape(ops::conv2d(grid, w.conv[k]), {g * g, c.d_a}), w.conv_bias[k]);
        acc = acc.defined() ? ops::add(acc, lk) : lk;
    }
    auto p = nn::mlp(acc, w.merge);
    return ops::add(patches, ops::mul_rowwise(nn::mlp(p, w.up), w.gate));
}

Box clamp_region_box(const Box& box, std::size_t grid) {
    Box b = clamp_unit(box);
    const double m = 1.0 / static_cast<double>(grid);
    auto widen = [m](double& lo, double& hi) {
        if (hi - lo >= m) return;
        const double c = std::clamp(0.5 * (lo + hi), 0.5 * m, 1.0 - 0.5 * m);
        lo = c - 0.5 * m;
        hi = c + 0.5 * m;
    };
    widen(b.x1, b.x2);
    widen(b.y1, b.y2);
    return b;
}

namespace {

Tensor pooled_region(const Tensor& patches, const Box& box, const ModelConfig& c) {
    const std::size_t g = c.grid();
    auto fm = ops::reshape(patches, {g, g, c.d_clip});
    auto r = ops::roi_align(fm, clamp_region_box(box, g), c.roi_size, c.roi_samples);
    return ops::reshape(r, {c.roi_size * c.roi_size, c.d_clip});
}

}  // namespace

Tensor region_features(const Tensor& patches, const Box& box, const LainModel& model, std::size_t layer) {
    return nn::mlp(pooled_region(patches, box, model.config()), model.ia.at(layer).region);
}

IprmOutput iprm(const Tensor& rh, const Tensor& ro, const IaWeights& w, std::size_t heads) {
    auto th = nn::multi_head_cross_attention(w.queries, rh, rh, heads, w.context);
    auto to = nn::multi_head_cross_attention(w.queries, ro, ro, heads, w.context);
    return {nn::multi_head_cross_attention(th, to, to, heads, w.pattern_h),
            nn::multi_head_cross_attention(to, th, th, heads, w.pattern_o)};
}

Tensor interaction_adapter(const Tensor& ho_tokens, const Tensor& patches, const std::vector<Detection>& detections,
                           const HoPairIndex& pairs, const LainModel& model, std::size_t layer) {
    const std::size_t n = pairs.count();
    if (n == 0) return ho_tokens;
    const auto& c = model.config();
    const auto& w = model.ia.at(layer);
    const std::size_t s2 = c.roi_size * c.roi_size, np = c.n_p, heads = c.adapter_heads;

    // Each involved detection is pooled and contextualised once.
    std::vector<std::size_t> local(detections.size(), SIZE_MAX), involved;
    for (const auto& [u, v] : pairs.pairs)
        for (auto d : {u, v})
            if (local[d] == SIZE_MAX) {
                local[d] = 0;
                involved.push_back(d);
            }
    std::sort(involved.begin(), involved.end());
    for (std::size_t i = 0; i < involved.size(); ++i) local[involved[i]] = i;
    const std::size_t m = involved.size();

    std::vector<Tensor> pooled;
    for (auto d : involved) pooled.push_back(pooled_region(patches, detections[d].box, c));
    auto regions = nn::mlp(ops::concat_rows(pooled), w.region);  // (m s2) x d_a

    std::vector<std::size_t> q_rows(m * np), q_block(m * np), r_block(m * s2);
    for (std::size_t i = 0; i < m * np; ++i) q_rows[i] = i % np, q_block[i] = i / np;
    for (std::size_t i = 0; i < m * s2; ++i) r_block[i] = i / s2;
    auto ctx_mask = block_mask(m * np, m * s2, q_block, r_block);
    auto ctx = nn::multi_head_cross_attention(ops::gather_rows(w.queries, q_rows), regions, regions, heads, w.context,
                                              ctx_mask);  // (m np) x d_a

    std::vector<std::size_t> h_rows(n * np), o_rows(n * np), h_blk(n * np), o_blk(n * np), ctx_block(m * np),
        pair_block(n * np), tok_block(n);
    for (std::size_t i = 0; i < m * np; ++i) ctx_block[i] = i / np;
    for (std::size_t p = 0; p < n; ++p) {
        tok_block[p] = p;
        const auto hu = local[pairs.pairs[p].first], ov = local[pairs.pairs[p].second];
        for (std::size_t q = 0; q < np; ++q) {
            h_rows[p * np + q] = hu * np + q;
            o_rows[p * np + q] = ov * np + q;
            h_blk[p * np + q] = hu;
            o_blk[p * np + q] = ov;
            pair_block[p * np + q] = p;
        }
    }
    auto qh = ops::gather_rows(ctx, h_rows);
    auto qo = ops::gather_rows(ctx, o_rows);
    auto rh_hat =
        nn::multi_head_cross_attention(qh, ctx, ctx, heads, w.pattern_h, block_mask(n * np, m * np, o_blk, ctx_block));
    auto ro_hat =
        nn::multi_head_cross_attention(qo, ctx, ctx, heads, w.pattern_o, block_mask(n * np, m * np, h_blk, ctx_block));

    auto t_small = nn::mlp(ho_tokens, w.token_down);
    auto read_mask = block_mask(n, n * np, tok_block, pair_block);
    auto rbar_h = nn::multi_head_cross_attention(t_small, rh_hat, rh_hat, heads, w.readout, read_mask);
    auto rbar_o = nn::multi_head_cross_attention(t_small, ro_hat, ro_hat, heads, w.readout, read_mask);
    auto update = nn::mlp(ops::concat_cols({rbar_h, rbar_o}), w.fuse);
    return ops::add(ho_tokens, ops::mul_rowwise(update, w.gate));
}

Segments backbone_layer(const Segments& in, const LainModel& model, std::size_t layer) {
    const auto& c = model.config();
    const auto& w = model.backbone.at(layer);
    const std::size_t nh = in.ho.dim(0), np = in.patches.dim(0), total = nh + 1 + np;
    auto x = nh ? ops::concat_rows({in.ho, in.cls, in.patches}) : ops::concat_rows({in.cls, in.patches});
    std::vector<std::uint8_t> mask;
    if (c.mask_image_tokens && nh) {
        mask.assign(total * total, 1);
        for (std::size_t i = nh; i < total; ++i)
            for (std::size_t j = 0; j < nh; ++j) mask[i * total + j] = 0;
    }
    auto h = nn::layer_norm(x, w.ln1, c.ln_eps);
    x = ops::add(x, nn::multi_head_cross_attention(h, h, h, c.heads, w.attn, mask));
    x = ops::add(x, nn::mlp(nn::layer_norm(x, w.ln2, c.ln_eps), w.mlp));
    Segments out;
    out.ho = nh ? ops::slice_rows(x, 0, nh) : in.ho;
    out.cls = ops::slice_rows(x, nh, 1);
    out.patches = ops::slice_rows(x, nh + 1, np);
    return out;
}

ForwardResult lain_forward(std::span<const float> pixels, const std::vector<Detection>& detections,
                           const LainModel& model) {
    const auto& c = model.config();
    auto img = embed_patches(pixels, model);
    auto [pairs, tokens] = construct_ho_tokens(detections, model);
    Segments seg{tokens, img.cls, img.patches};
    for (std::size_t l = 0; l < c.layers; ++l) {
        if (c.use_la) seg.patches = locality_adapter(seg.patches, build_layout_embedding(detections, model, l), model, l);
        if (c.use_ia) seg.ho = interaction_adapter(seg.ho, seg.patches, detections, pairs, model, l);
        seg = backbone_layer(seg, model, l);
    }
    return {std::move(pairs), std::move(seg)};
}

Tensor text_embeddings(const LainModel& model) {
    const auto& space = model.space();
    std::vector<std::size_t> obj, verb;
    for (const auto& cat : space.categories()) {
        obj.push_back(cat.object);
        verb.push_back(cat.verb);
    }
    auto x = ops::concat_cols({ops::gather_rows(model.text.objects, obj), ops::gather_rows(model.text.verbs, verb)});
    return ops::normalize_rows(nn::mlp(ops::add_rowwise(x, model.text.prompt_offset), model.text.mixer));
}

Tensor compute_scores(const Tensor& tokens, const Tensor& embeddings, double tau) {
    if (!(tau > 0.0)) throw InvalidStateError("logit temperature must be positive, got " + fmt_double(tau));
    return ops::sigmoid(ops::scale(ops::matmul(tokens, ops::transpose(embeddings)), 1.0 / tau));
}

Tensor compute_scores(const Tensor& tokens, const Tensor& embeddings, const Tensor& log_tau) {
    if (!std::isfinite(log_tau.item())) throw InvalidStateError("logit temperature is not finite");
    auto inv_tau = ops::exp(ops::scale(log_tau, -1.0));
    return ops::sigmoid(ops::mul_scalar(ops::matmul(tokens, ops::transpose(embeddings)), inv_tau));
}

ScoredScene score_scene(std::span<const float> pixels, const std::vector<Detection>& detections,
                        const LainModel& model) {
    auto fwd = lain_forward(pixels, detections, model);
    const std::size_t nc = model.space().num_categories();
    if (fwd.pairs.count() == 0) return {std::move(fwd.pairs), Tensor::zeros({0, nc})};
    return {std::move(fwd.pairs), compute_scores(fwd.final.ho, text_embeddings(model), model.text.log_tau)};
}

}  // namespace lain
