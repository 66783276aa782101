#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lain/category_space.hpp"
#include "lain/nn.hpp"
#include "lain/param_store.hpp"
#include "lain/scene.hpp"

namespace lain {

struct ModelConfig {
    std::size_t layers = 4;
    std::size_t d_clip = 64;
    std::size_t heads = 4;
    std::size_t mlp_hidden = 256;
    std::size_t image_size = 64;
    std::size_t patch_size = 8;
    std::size_t d_det = 32;
    std::size_t d_t = 32;
    std::size_t text_hidden = 64;
    std::size_t d_a = 16;
    std::vector<std::size_t> kernels{1, 3, 5};
    std::size_t n_p = 4;
    std::size_t adapter_heads = 4;
    std::size_t roi_size = 3;
    std::size_t roi_samples = 2;
    bool use_la = true;
    bool use_ia = true;
    bool mask_image_tokens = false;  // cls and patches may not attend to HO tokens
    double la_init_gain = 0.1;
    double ia_init_gain = 1.0;
    double ln_eps = 1e-6;
    std::uint64_t backbone_seed = 7;
    std::uint64_t text_seed = 11;
    std::uint64_t adapter_seed = 13;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t patch_dim() const { return patch_size * patch_size * 3; }
    void validate() const;
    // Canonical "key=value" lines, sorted by key.
    std::string canonical() const;
    std::uint64_t digest() const;
};

class InvalidStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct BackboneLayerWeights {
    nn::LayerNormWeights ln1, ln2;
    nn::AttentionWeights attn;
    nn::MlpWeights mlp;
};

struct LaWeights {
    nn::MlpWeights down;    // d_clip -> d_a
    nn::MlpWeights layout;  // [box; conf; e_t] -> d_a
    Tensor null_cell;       // d_a
    nn::MlpWeights fuse;
    nn::LayerNormWeights ln;
    std::vector<Tensor> conv;       // k x k x d_a x d_a
    std::vector<Tensor> conv_bias;  // d_a
    nn::MlpWeights merge;
    nn::MlpWeights up;  // d_a -> d_clip
    Tensor gate;        // d_clip
};

struct IaWeights {
    nn::MlpWeights region;  // d_clip -> d_a
    Tensor queries;         // n_p x d_a
    nn::AttentionWeights context;
    nn::AttentionWeights pattern_h, pattern_o;
    nn::MlpWeights token_down;  // d_clip -> d_a
    nn::AttentionWeights readout;
    nn::MlpWeights fuse;  // 2 d_a -> d_clip
    Tensor gate;          // d_clip
};

struct TextWeights {
    Tensor objects;  // n_objects x d_t, unit rows
    Tensor verbs;    // n_verbs x d_t, unit rows
    nn::MlpWeights mixer;
    Tensor prompt_offset;  // 2 d_t
    Tensor log_tau;        // 1
};

// Parameter naming: frozen backbone under "backbone.", text tables and mixer
// under "text." (prompt_offset and log_tau trainable), HO-token maps under
// "ho.", adapters under "la.<l>." and "ia.<l>.".
class LainModel {
public:
    LainModel(ModelConfig config, std::shared_ptr<const CategorySpace> space);
    LainModel(const LainModel& other);
    LainModel& operator=(const LainModel&) = delete;

    const ModelConfig& config() const { return config_; }
    const CategorySpace& space() const { return *space_; }
    std::shared_ptr<const CategorySpace> space_ptr() const { return space_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Zeroes (or sets) every LA and IA gate.
    void set_gates(double value);
    void randomize_gates(double stddev, std::uint64_t seed);

    // Weight views, valid for the model's lifetime.
    Tensor patch_embed_w, patch_embed_b, pos_embed, cls_token;
    std::vector<BackboneLayerWeights> backbone;
    nn::MlpWeights ho_mlp;       // 2 d_det -> d_clip
    nn::LinearWeights ho_geom;   // 8 -> d_clip
    std::vector<LaWeights> la;
    std::vector<IaWeights> ia;
    TextWeights text;

private:
    void build();
    ModelConfig config_;
    std::shared_ptr<const CategorySpace> space_;
    ParamStore params_;
};

// Ordered (u, v) detection pairs with u a human detection and v != u.
struct HoPairIndex {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t count() const { return pairs.size(); }
};

HoPairIndex enumerate_pairs(const std::vector<Detection>& detections, std::size_t human_class);

// (pairs, N_pair x d_clip tokens).
std::pair<HoPairIndex, Tensor> construct_ho_tokens(const std::vector<Detection>& detections, const LainModel& model);

struct ImageTokens {
    Tensor cls;      // 1 x d_clip
    Tensor patches;  // (H W) x d_clip
};

ImageTokens embed_patches(std::span<const float> pixels, const LainModel& model);

// (H W) x d_a.
Tensor build_layout_embedding(const std::vector<Detection>& detections, const LainModel& model, std::size_t layer);
// Index of the covering detection per cell, or -1.
std::vector<long> layout_assignment(const std::vector<Detection>& detections, std::size_t grid);

Tensor locality_adapter(const Tensor& patches, const Tensor& layout, const LainModel& model, std::size_t layer);

// Region features of one detection box: ROI pooled from the patch map, then the region FFN.
Tensor region_features(const Tensor& patches, const Box& box, const LainModel& model, std::size_t layer);
Box clamp_region_box(const Box& box, std::size_t grid);

struct IprmOutput {
    Tensor rh, ro;  // n_p x d_a each
};
IprmOutput iprm(const Tensor& rh, const Tensor& ro, const IaWeights& w, std::size_t heads);

Tensor interaction_adapter(const Tensor& ho_tokens, const Tensor& patches, const std::vector<Detection>& detections,
                           const HoPairIndex& pairs, const LainModel& model, std::size_t layer);

struct Segments {
    Tensor ho;       // N_pair x d_clip
    Tensor cls;      // 1 x d_clip
    Tensor patches;  // (H W) x d_clip
};

Segments backbone_layer(const Segments& in, const LainModel& model, std::size_t layer);

struct ForwardResult {
    HoPairIndex pairs;
    Segments final;
};

ForwardResult lain_forward(std::span<const float> pixels, const std::vector<Detection>& detections,
                           const LainModel& model);

// N_categories x d_clip, unit rows.
Tensor text_embeddings(const LainModel& model);

// sigmoid(T E^T / tau). Throws InvalidStateError when tau <= 0.
Tensor compute_scores(const Tensor& tokens, const Tensor& embeddings, double tau);
// Same with tau = exp(log_tau) held as a trainable tensor.
Tensor compute_scores(const Tensor& tokens, const Tensor& embeddings, const Tensor& log_tau);

struct ScoredScene {
    HoPairIndex pairs;
    Tensor scores;  // N_pair x N_categories
};
ScoredScene score_scene(std::span<const float> pixels, const std::vector<Detection>& detections,
                        const LainModel& model);

// Config digest combined with the category space names.
std::uint64_t model_digest(const LainModel& model);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary layout: "LAINCKPT", u32 version, u64 model digest, u64 run digest,
// u32 entry count, then per entry (u32 name length, name, u32 rank, u64 dims,
// u8 frozen, u64 payload offset), then little-endian f64 payloads.
void save_checkpoint(const std::string& path, const LainModel& model, std::uint64_t run_digest = 0);
// Returns the stored run digest. Shapes and the model digest must match unless `force`.
std::uint64_t load_checkpoint(const std::string& path, LainModel& model, bool force = false);

}  // namespace lain
