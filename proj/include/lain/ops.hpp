#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lain/box.hpp"
#include "lain/tensor.hpp"

// Differentiable primitives. Matrices are rank-2 row-major; "rowwise" ops
// broadcast a vector over the last axis.
namespace lain::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
// x[n,in] * w[in,out] + b[out]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowwise(const Tensor& x, const Tensor& v);
Tensor mul_rowwise(const Tensor& x, const Tensor& v);
Tensor scale(const Tensor& x, double factor);
// x * s where s is a one-element tensor.
Tensor mul_scalar(const Tensor& x, const Tensor& s);

Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor normalize_rows(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// "Same" zero-padded convolution: input H x W x C_in, kernel k x k x C_in x C_out.
Tensor conv2d(const Tensor& input, const Tensor& kernel);

class DegenerateBoxError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bins of an out_size x out_size grid over `box` (normalized), each the mean of
// samples x samples bilinear taps. Pixel (i, j) of the map sits at normalized
// ((j + 0.5) / W, (i + 0.5) / H); taps outside the map are clamped to the border.
Tensor roi_align(const Tensor& feature_map, const Box& box, std::size_t out_size,
                 std::size_t samples_per_bin);

class EmptyKeysError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Multi-head scaled dot-product attention on already-projected inputs.
// `allowed`, when non-empty, is an n_q x n_k mask (nonzero = may attend).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::span<const std::uint8_t> allowed = {});

// Mean over entries of the binary focal loss; p is clamped to [1e-12, 1 - 1e-12].
Tensor focal_bce(const Tensor& scores, const Tensor& labels, double alpha, double gamma);

}  // namespace lain::ops
