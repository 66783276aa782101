#pragma once

// Reference compositions of the model's building blocks on plain vectors.

#include "lain/nn.hpp"
#include "oracles.hpp"

namespace oracle {

inline std::vector<double> vec(const lain::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline std::vector<double> lin(const std::vector<double>& x, std::size_t in, const lain::nn::LinearWeights& w) {
    return linear(x, in, vec(w.w), vec(w.b));
}

inline std::vector<double> mlp(const std::vector<double>& x, std::size_t in, const lain::nn::MlpWeights& w) {
    return lin(gelu(lin(x, in, w.fc1)), w.fc1.b.numel(), w.fc2);
}

inline std::vector<double> ln(const std::vector<double>& x, const lain::nn::LayerNormWeights& w, double eps) {
    return layer_norm(x, vec(w.gain), vec(w.bias), eps);
}

inline std::vector<double> mha(const std::vector<double>& q, const std::vector<double>& kv, std::size_t D,
                               std::size_t heads, const lain::nn::AttentionWeights& w) {
    const int nq = static_cast<int>(q.size() / D), nk = static_cast<int>(kv.size() / D);
    auto a = attention(lin(q, D, w.q), lin(kv, D, w.k), lin(kv, D, w.v), nq, nk, static_cast<int>(D),
                       static_cast<int>(heads));
    return lin(a, D, w.out);
}

inline std::vector<double> gated(const std::vector<double>& base, const std::vector<double>& update,
                                 const std::vector<double>& gate) {
    std::vector<double> out(base);
    const std::size_t d = gate.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += gate[i % d] * update[i];
    return out;
}

}  // namespace oracle
