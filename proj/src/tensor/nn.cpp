#include "lain/nn.hpp"

#include <cmath>

namespace lain::nn {

LinearWeights make_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                          bool trainable, std::mt19937_64& rng, double gain) {
    LinearWeights w;
    w.w = store.add_normal(prefix + ".w", {in, out}, gain / std::sqrt(static_cast<double>(in)), trainable, rng);
    w.b = store.add_constant(prefix + ".b", {out}, 0.0, trainable);
    return w;
}

MlpWeights make_mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                    std::size_t out, bool trainable, std::mt19937_64& rng, double gain) {
    MlpWeights w;
    w.fc1 = make_linear(store, prefix + ".fc1", in, hidden, trainable, rng, gain);
    w.fc2 = make_linear(store, prefix + ".fc2", hidden, out, trainable, rng, gain);
    return w;
}

AttentionWeights make_attention(ParamStore& store, const std::string& prefix, std::size_t dim, bool trainable,
                                std::mt19937_64& rng, double gain) {
    AttentionWeights w;
    w.q = make_linear(store, prefix + ".q", dim, dim, trainable, rng, gain);
    w.k = make_linear(store, prefix + ".k", dim, dim, trainable, rng, gain);
    w.v = make_linear(store, prefix + ".v", dim, dim, trainable, rng, gain);
    w.out = make_linear(store, prefix + ".out", dim, dim, trainable, rng, gain);
    return w;
}

LayerNormWeights make_layer_norm(ParamStore& store, const std::string& prefix, std::size_t dim, bool trainable) {
    return {store.add_constant(prefix + ".gain", {dim}, 1.0, trainable),
            store.add_constant(prefix + ".bias", {dim}, 0.0, trainable)};
}

Tensor linear(const Tensor& x, const LinearWeights& w) { return ops::linear(x, w.w, w.b); }

Tensor mlp(const Tensor& x, const MlpWeights& w) { return linear(ops::gelu(linear(x, w.fc1)), w.fc2); }

Tensor multi_head_cross_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                  std::size_t heads, const AttentionWeights& w,
                                  std::span<const std::uint8_t> allowed) {
    if (keys.rank() == 2 && keys.dim(0) == 0) throw ops::EmptyKeysError("cross attention: empty key set");
    auto q = linear(queries, w.q);
    auto k = linear(keys, w.k);
    auto v = linear(values, w.v);
    return linear(ops::attention(q, k, v, heads, allowed), w.out);
}

Tensor layer_norm(const Tensor& x, const LayerNormWeights& w, double eps) {
    return ops::layer_norm(x, w.gain, w.bias, eps);
}

}  // namespace lain::nn
