#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "lain/ops.hpp"
#include "lain/param_store.hpp"

// Parameterized building blocks shared by the backbone and the adapters.
namespace lain::nn {

struct LinearWeights {
    Tensor w;  // in x out
    Tensor b;  // out
};

// Two-layer feed-forward map with a GELU between the layers.
struct MlpWeights {
    LinearWeights fc1;
    LinearWeights fc2;
};

struct AttentionWeights {
    LinearWeights q, k, v, out;
};

struct LayerNormWeights {
    Tensor gain;
    Tensor bias;
};

// Registration helpers: weights ~ N(0, gain^2 / fan_in), biases zero.
LinearWeights make_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                          bool trainable, std::mt19937_64& rng, double gain = 1.0);
MlpWeights make_mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                    std::size_t out, bool trainable, std::mt19937_64& rng, double gain = 1.0);
AttentionWeights make_attention(ParamStore& store, const std::string& prefix, std::size_t dim, bool trainable,
                                std::mt19937_64& rng, double gain = 1.0);
LayerNormWeights make_layer_norm(ParamStore& store, const std::string& prefix, std::size_t dim, bool trainable);

Tensor linear(const Tensor& x, const LinearWeights& w);
Tensor mlp(const Tensor& x, const MlpWeights& w);

// Projects queries/keys/values, runs per-head scaled dot-product attention
// with 1/sqrt(dim/heads) scaling, then applies the output projection.
Tensor multi_head_cross_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                  std::size_t heads, const AttentionWeights& w,
                                  std::span<const std::uint8_t> allowed = {});

Tensor layer_norm(const Tensor& x, const LayerNormWeights& w, double eps);

}  // namespace lain::nn
