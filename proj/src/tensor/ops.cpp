#include "lain/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace lain::ops {

using detail::Node;
using detail::make_result;

namespace {

std::size_t rows_of(const Tensor& x) { return x.rank() == 1 ? 1 : x.numel() / x.shape().back(); }

void require_matrix(const Tensor& x, const char* op, const char* what) {
    if (x.rank() != 2)
        throw ShapeError(std::string(op) + ": " + what + " must be rank 2, got " + shape_str(x.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

Node* parent(Node& self, std::size_t i) {
    auto* p = self.parents[i].get();
    return p->requires_grad ? p : nullptr;
}

// Elementwise unary op with derivative expressed through input and output.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
    auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
    return make_result(x.shape(), std::move(out), {x}, name, [deriv](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p->value[i], self.value[i]);
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul", "lhs");
    require_matrix(b, "matmul", "rhs");
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    if (b.dim(0) != k)
        throw ShapeError("matmul: inner dimension mismatch (lhs cols=" + std::to_string(k) +
                         ", rhs rows=" + std::to_string(b.dim(0)) + ")");
    std::vector<double> out(n * m, 0.0);
    auto A = a.data();
    auto B = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            const double* brow = &B[p * m];
            double* orow = &out[i * m];
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    return make_result({n, m}, std::move(out), {a, b}, "matmul", [n, k, m](Node& self) {
        const auto& G = self.grad;
        if (auto* pa = parent(self, 0)) {
            auto gA = pa->ensure_grad();
            const auto& Bv = self.parents[1]->value;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) acc += G[i * m + j] * Bv[p * m + j];
                    gA[i * k + p] += acc;
                }
        }
        if (auto* pb = parent(self, 1)) {
            auto gB = pb->ensure_grad();
            const auto& Av = self.parents[0]->value;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = Av[i * k + p];
                    for (std::size_t j = 0; j < m; ++j) gB[p * m + j] += av * G[i * m + j];
                }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_matrix(x, "linear", "input");
    require_matrix(w, "linear", "weight");
    const std::size_t n = x.dim(0), k = x.dim(1), m = w.dim(1);
    if (w.dim(0) != k)
        throw ShapeError("linear: weight rows (" + std::to_string(w.dim(0)) + ") do not match input width (" +
                         std::to_string(k) + ")");
    const bool has_bias = b.defined();
    if (has_bias && b.numel() != m)
        throw ShapeError("linear: bias length (" + std::to_string(b.numel()) + ") does not match output width (" +
                         std::to_string(m) + ")");
    std::vector<double> out(n * m, 0.0);
    auto X = x.data();
    auto W = w.data();
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = &out[i * m];
        if (has_bias) std::copy(b.data().begin(), b.data().end(), orow);
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = X[i * k + p];
            const double* wrow = &W[p * m];
            for (std::size_t j = 0; j < m; ++j) orow[j] += xv * wrow[j];
        }
    }
    std::vector<Tensor> parents{x, w};
    if (has_bias) parents.push_back(b);
    return make_result({n, m}, std::move(out), std::move(parents), "linear", [n, k, m, has_bias](Node& self) {
        const auto& G = self.grad;
        if (auto* px = parent(self, 0)) {
            auto gX = px->ensure_grad();
            const auto& Wv = self.parents[1]->value;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* wrow = &Wv[p * m];
                    const double* grow = &G[i * m];
                    for (std::size_t j = 0; j < m; ++j) acc += grow[j] * wrow[j];
                    gX[i * k + p] += acc;
                }
        }
        if (auto* pw = parent(self, 1)) {
            auto gW = pw->ensure_grad();
            const auto& Xv = self.parents[0]->value;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double xv = Xv[i * k + p];
                    if (xv == 0.0) continue;
                    double* gwrow = &gW[p * m];
                    const double* grow = &G[i * m];
                    for (std::size_t j = 0; j < m; ++j) gwrow[j] += xv * grow[j];
                }
        }
        if (has_bias)
            if (auto* pb = parent(self, 2)) {
                auto gB = pb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gB[j] += G[i * m + j];
            }
    });
}

Tensor transpose(const Tensor& x) {
    require_matrix(x, "transpose", "input");
    const std::size_t n = x.dim(0), m = x.dim(1);
    std::vector<double> out(n * m);
    auto X = x.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = X[i * m + j];
    return make_result({m, n}, std::move(out), {x}, "transpose", [n, m](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[j * n + i];
    });
}

namespace {

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, double da_sign, double db_sign, bool product) {
    require_same_shape(a, b, name);
    auto A = a.data();
    auto B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(A[i], B[i]);
    return make_result(a.shape(), std::move(out), {a, b}, name, [da_sign, db_sign, product](Node& self) {
        auto* pa = parent(self, 0);
        auto* pb = parent(self, 1);
        const auto& G = self.grad;
        if (pa) {
            auto g = pa->ensure_grad();
            if (product)
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i] * self.parents[1]->value[i];
            else
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += da_sign * G[i];
        }
        if (pb) {
            auto g = pb->ensure_grad();
            if (product)
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i] * self.parents[0]->value[i];
            else
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += db_sign * G[i];
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0, false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(a, b, "mul", [](double x, double y) { return x * y; }, 0.0, 0.0, true);
}

Tensor add_rowwise(const Tensor& x, const Tensor& v) {
    const std::size_t d = v.numel();
    if (x.rank() == 0 || x.shape().back() != d)
        throw ShapeError("add_rowwise: last dimension of " + shape_str(x.shape()) + " does not match vector length " +
                         std::to_string(d));
    auto X = x.data();
    auto V = v.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] + V[i % d];
    return make_result(x.shape(), std::move(out), {x, v}, "add_rowwise", [d](Node& self) {
        const auto& G = self.grad;
        if (auto* px = parent(self, 0)) {
            auto g = px->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i];
        }
        if (auto* pv = parent(self, 1)) {
            auto g = pv->ensure_grad();
            for (std::size_t i = 0; i < G.size(); ++i) g[i % d] += G[i];
        }
    });
}

Tensor mul_rowwise(const Tensor& x, const Tensor& v) {
    const std::size_t d = v.numel();
    if (x.rank() == 0 || x.shape().back() != d)
        throw ShapeError("mul_rowwise: last dimension of " + shape_str(x.shape()) + " does not match vector length " +
                         std::to_string(d));
    auto X = x.data();
    auto V = v.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * V[i % d];
    return make_result(x.shape(), std::move(out), {x, v}, "mul_rowwise", [d](Node& self) {
        const auto& G = self.grad;
        const auto& Xv = self.parents[0]->value;
        const auto& Vv = self.parents[1]->value;
        if (auto* px = parent(self, 0)) {
            auto g = px->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i] * Vv[i % d];
        }
        if (auto* pv = parent(self, 1)) {
            auto g = pv->ensure_grad();
            for (std::size_t i = 0; i < G.size(); ++i) g[i % d] += G[i] * Xv[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1) throw ShapeError("mul_scalar: factor must have one element, got " + shape_str(s.shape()));
    const double f = s.item();
    auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * f;
    return make_result(x.shape(), std::move(out), {x, s}, "mul_scalar", [](Node& self) {
        const auto& G = self.grad;
        const auto& Xv = self.parents[0]->value;
        const double f = self.parents[1]->value[0];
        if (auto* px = parent(self, 0)) {
            auto g = px->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i] * f;
        }
        if (auto* ps = parent(self, 1)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < G.size(); ++i) acc += G[i] * Xv[i];
            ps->ensure_grad()[0] += acc;
        }
    });
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    constexpr double inv_sqrt2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    return unary(
        x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [](double v, double) { return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v); });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, "sigmoid",
        [](double v) {
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor softmax_rows(const Tensor& x) {
    const std::size_t d = x.shape().back();
    const std::size_t n = rows_of(x);
    auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t r = 0; r < n; ++r) {
        const double* in = &X[r * d];
        double* o = &out[r * d];
        double mx = *std::max_element(in, in + d);
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += (o[j] = std::exp(in[j] - mx));
        for (std::size_t j = 0; j < d; ++j) o[j] /= z;
    }
    return make_result(x.shape(), std::move(out), {x}, "softmax_rows", [n, d](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t r = 0; r < n; ++r) {
            const double* y = &self.value[r * d];
            const double* gy = &self.grad[r * d];
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += y[j] * gy[j];
            for (std::size_t j = 0; j < d; ++j) g[r * d + j] += y[j] * (gy[j] - dot);
        }
    });
}

Tensor normalize_rows(const Tensor& x) {
    const std::size_t d = x.shape().back();
    const std::size_t n = rows_of(x);
    auto X = x.data();
    std::vector<double> out(X.size());
    std::vector<double> norms(n);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += X[r * d + j] * X[r * d + j];
        norms[r] = std::sqrt(s);
        if (norms[r] == 0.0) throw std::domain_error("normalize_rows: zero-norm row " + std::to_string(r));
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = X[r * d + j] / norms[r];
    }
    return make_result(x.shape(), std::move(out), {x}, "normalize_rows", [n, d, norms](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t r = 0; r < n; ++r) {
            const double* y = &self.value[r * d];
            const double* gy = &self.grad[r * d];
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += y[j] * gy[j];
            for (std::size_t j = 0; j < d; ++j) g[r * d + j] += (gy[j] - y[j] * dot) / norms[r];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), {x}, "reshape", [](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t d = parts.front().dim(1);
    std::size_t rows = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_rows", "input");
        if (p.dim(1) != d)
            throw ShapeError("concat_rows: column count " + std::to_string(p.dim(1)) + " differs from " +
                             std::to_string(d));
        rows += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(rows * d);
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(out.size());
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return make_result({rows, d}, std::move(out), parts, "concat_rows", [offsets](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            auto* p = parent(self, i);
            if (!p) continue;
            auto g = p->ensure_grad();
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += self.grad[offsets[i] + j];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = parts.front().dim(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols", "input");
        if (p.dim(0) != n)
            throw ShapeError("concat_cols: row count " + std::to_string(p.dim(0)) + " differs from " +
                             std::to_string(n));
        widths.push_back(p.dim(1));
        total += p.dim(1);
    }
    std::vector<double> out(n * total);
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto P = parts[k].data();
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(&P[i * widths[k]], widths[k], &out[i * total + col]);
        col += widths[k];
    }
    return make_result({n, total}, std::move(out), parts, "concat_cols", [n, total, widths](Node& self) {
        std::size_t col = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            if (auto* p = parent(self, k)) {
                auto g = p->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += self.grad[i * total + col + j];
            }
            col += widths[k];
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    require_matrix(x, "slice_rows", "input");
    const std::size_t d = x.dim(1);
    if (start + count > x.dim(0))
        throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") exceed " + std::to_string(x.dim(0)));
    std::vector<double> out(x.data().begin() + start * d, x.data().begin() + (start + count) * d);
    return make_result({count, d}, std::move(out), {x}, "slice_rows", [start, d](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * d + i] += self.grad[i];
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows) {
    require_matrix(table, "gather_rows", "table");
    const std::size_t d = table.dim(1);
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    std::vector<double> out(idx.size() * d);
    auto T = table.data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= table.dim(0))
            throw ShapeError("gather_rows: row index " + std::to_string(idx[r]) + " out of range " +
                             std::to_string(table.dim(0)));
        std::copy_n(&T[idx[r] * d], d, &out[r * d]);
    }
    return make_result({idx.size(), d}, std::move(out), {table}, "gather_rows", [idx, d](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < d; ++j) g[idx[r] * d + j] += self.grad[r * d + j];
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_result({1}, {s}, {x}, "sum", [](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
    if (weights.size() != x.numel()) throw ShapeError("weighted_sum: weight count mismatch");
    double s = 0.0;
    auto X = x.data();
    for (std::size_t i = 0; i < X.size(); ++i) s += X[i] * weights[i];
    std::vector<double> w(weights.begin(), weights.end());
    return make_result({1}, {s}, {x}, "weighted_sum", [w](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * w[i];
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t d = x.shape().back();
    if (d < 2) throw ShapeError("layer_norm: last dimension must be at least 2");
    if (gain.numel() != d) throw ShapeError("layer_norm: gain length " + std::to_string(gain.numel()) +
                                            " does not match D=" + std::to_string(d));
    if (bias.numel() != d) throw ShapeError("layer_norm: bias length " + std::to_string(bias.numel()) +
                                            " does not match D=" + std::to_string(d));
    const std::size_t n = rows_of(x);
    auto X = x.data();
    auto Gn = gain.data();
    auto Bs = bias.data();
    std::vector<double> out(X.size());
    std::vector<double> xhat(X.size());
    std::vector<double> inv_std(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* in = &X[r * d];
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += in[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= static_cast<double>(d);
        const double denom = std::sqrt(var + eps);
        // Zero variance with eps = 0 leaves a centred zero vector.
        inv_std[r] = denom > 0.0 ? 1.0 / denom : 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (in[j] - mu) * inv_std[r];
            out[r * d + j] = xhat[r * d + j] * Gn[j] + Bs[j];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gain, bias}, "layer_norm",
                       [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                           const auto& G = self.grad;
                           const auto& Gn = self.parents[1]->value;
                           if (auto* px = parent(self, 0)) {
                               auto g = px->ensure_grad();
                               for (std::size_t r = 0; r < n; ++r) {
                                   double m1 = 0.0, m2 = 0.0;
                                   for (std::size_t j = 0; j < d; ++j) {
                                       const double dxh = G[r * d + j] * Gn[j];
                                       m1 += dxh;
                                       m2 += dxh * xhat[r * d + j];
                                   }
                                   m1 /= static_cast<double>(d);
                                   m2 /= static_cast<double>(d);
                                   for (std::size_t j = 0; j < d; ++j) {
                                       const double dxh = G[r * d + j] * Gn[j];
                                       g[r * d + j] += inv_std[r] * (dxh - m1 - xhat[r * d + j] * m2);
                                   }
                               }
                           }
                           if (auto* pg = parent(self, 1)) {
                               auto g = pg->ensure_grad();
                               for (std::size_t i = 0; i < G.size(); ++i) g[i % d] += G[i] * xhat[i];
                           }
                           if (auto* pb = parent(self, 2)) {
                               auto g = pb->ensure_grad();
                               for (std::size_t i = 0; i < G.size(); ++i) g[i % d] += G[i];
                           }
                       });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel) {
    if (input.rank() != 3) throw ShapeError("conv2d: input must be H x W x C, got " + shape_str(input.shape()));
    if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be k x k x C_in x C_out, got " + shape_str(kernel.shape()));
    const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
    const std::size_t k = kernel.dim(0), O = kernel.dim(3);
    if (kernel.dim(1) != k) throw ShapeError("conv2d: kernel width (" + std::to_string(kernel.dim(1)) +
                                             ") differs from kernel height (" + std::to_string(k) + ")");
    if (k % 2 == 0) throw ShapeError("conv2d: kernel size k=" + std::to_string(k) + " must be odd");
    if (kernel.dim(2) != C)
        throw ShapeError("conv2d: kernel C_in (" + std::to_string(kernel.dim(2)) + ") does not match input C (" +
                         std::to_string(C) + ")");
    const long pad = static_cast<long>(k / 2);
    auto X = input.data();
    auto K = kernel.data();
    std::vector<double> out(H * W * O, 0.0);
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            double* o = &out[(i * W + j) * O];
            for (std::size_t di = 0; di < k; ++di) {
                const long ii = static_cast<long>(i + di) - pad;
                if (ii < 0 || ii >= static_cast<long>(H)) continue;
                for (std::size_t dj = 0; dj < k; ++dj) {
                    const long jj = static_cast<long>(j + dj) - pad;
                    if (jj < 0 || jj >= static_cast<long>(W)) continue;
                    const double* x = &X[(static_cast<std::size_t>(ii) * W + static_cast<std::size_t>(jj)) * C];
                    const double* kk = &K[((di * k + dj) * C) * O];
                    for (std::size_t c = 0; c < C; ++c) {
                        const double xv = x[c];
                        const double* krow = kk + c * O;
                        for (std::size_t q = 0; q < O; ++q) o[q] += xv * krow[q];
                    }
                }
            }
        }
    return make_result({H, W, O}, std::move(out), {input, kernel}, "conv2d", [H, W, C, k, O, pad](Node& self) {
        const auto& G = self.grad;
        auto* pin = parent(self, 0);
        auto* pk = parent(self, 1);
        std::span<double> gX, gK;
        if (pin) gX = pin->ensure_grad();
        if (pk) gK = pk->ensure_grad();
        const auto& Xv = self.parents[0]->value;
        const auto& Kv = self.parents[1]->value;
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                const double* go = &G[(i * W + j) * O];
                for (std::size_t di = 0; di < k; ++di) {
                    const long ii = static_cast<long>(i + di) - pad;
                    if (ii < 0 || ii >= static_cast<long>(H)) continue;
                    for (std::size_t dj = 0; dj < k; ++dj) {
                        const long jj = static_cast<long>(j + dj) - pad;
                        if (jj < 0 || jj >= static_cast<long>(W)) continue;
                        const std::size_t xoff = (static_cast<std::size_t>(ii) * W + static_cast<std::size_t>(jj)) * C;
                        const std::size_t koff = ((di * k + dj) * C) * O;
                        for (std::size_t c = 0; c < C; ++c) {
                            if (pin) {
                                double acc = 0.0;
                                const double* krow = &Kv[koff + c * O];
                                for (std::size_t q = 0; q < O; ++q) acc += go[q] * krow[q];
                                gX[xoff + c] += acc;
                            }
                            if (pk) {
                                const double xv = Xv[xoff + c];
                                double* gk = &gK[koff + c * O];
                                for (std::size_t q = 0; q < O; ++q) gk[q] += xv * go[q];
                            }
                        }
                    }
                }
            }
    });
}

Tensor roi_align(const Tensor& feature_map, const Box& box, std::size_t out_size, std::size_t samples_per_bin) {
    if (feature_map.rank() != 3)
        throw ShapeError("roi_align: feature map must be H x W x C, got " + shape_str(feature_map.shape()));
    if (out_size == 0 || samples_per_bin == 0) throw std::invalid_argument("roi_align: sizes must be positive");
    const Box b = clamp_unit(box);
    if (!(b.x2 > b.x1) || !(b.y2 > b.y1)) throw DegenerateBoxError("roi_align: degenerate box after clamping");
    const std::size_t H = feature_map.dim(0), W = feature_map.dim(1), C = feature_map.dim(2);

    struct Tap {
        std::size_t bin;
        std::size_t cell;
        double weight;
    };
    std::vector<Tap> taps;
    taps.reserve(out_size * out_size * samples_per_bin * samples_per_bin * 4);
    const double bx0 = b.x1 * W, by0 = b.y1 * H;
    const double bin_w = (b.x2 - b.x1) * W / out_size;
    const double bin_h = (b.y2 - b.y1) * H / out_size;
    const double per_sample = 1.0 / static_cast<double>(samples_per_bin * samples_per_bin);
    auto axis = [](double coord, std::size_t extent, std::size_t& lo, std::size_t& hi, double& frac) {
        double c = std::clamp(coord - 0.5, 0.0, static_cast<double>(extent - 1));
        lo = static_cast<std::size_t>(std::floor(c));
        hi = std::min(lo + 1, extent - 1);
        frac = c - static_cast<double>(lo);
    };
    for (std::size_t by = 0; by < out_size; ++by)
        for (std::size_t bx = 0; bx < out_size; ++bx) {
            const std::size_t bin = by * out_size + bx;
            for (std::size_t sy = 0; sy < samples_per_bin; ++sy) {
                const double y = by0 + by * bin_h + (sy + 0.5) * bin_h / samples_per_bin;
                std::size_t y0, y1;
                double fy;
                axis(y, H, y0, y1, fy);
                for (std::size_t sx = 0; sx < samples_per_bin; ++sx) {
                    const double x = bx0 + bx * bin_w + (sx + 0.5) * bin_w / samples_per_bin;
                    std::size_t x0, x1;
                    double fx;
                    axis(x, W, x0, x1, fx);
                    taps.push_back({bin, y0 * W + x0, per_sample * (1 - fy) * (1 - fx)});
                    taps.push_back({bin, y0 * W + x1, per_sample * (1 - fy) * fx});
                    taps.push_back({bin, y1 * W + x0, per_sample * fy * (1 - fx)});
                    taps.push_back({bin, y1 * W + x1, per_sample * fy * fx});
                }
            }
        }
    auto F = feature_map.data();
    std::vector<double> out(out_size * out_size * C, 0.0);
    for (const auto& t : taps) {
        if (t.weight == 0.0) continue;
        const double* src = &F[t.cell * C];
        double* dst = &out[t.bin * C];
        for (std::size_t c = 0; c < C; ++c) dst[c] += t.weight * src[c];
    }
    return make_result({out_size, out_size, C}, std::move(out), {feature_map}, "roi_align",
                       [taps = std::move(taps), C](Node& self) {
                           auto* p = parent(self, 0);
                           if (!p) return;
                           auto g = p->ensure_grad();
                           for (const auto& t : taps) {
                               if (t.weight == 0.0) continue;
                               const double* src = &self.grad[t.bin * C];
                               double* dst = &g[t.cell * C];
                               for (std::size_t c = 0; c < C; ++c) dst[c] += t.weight * src[c];
                           }
                       });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::span<const std::uint8_t> allowed) {
    require_matrix(q, "attention", "queries");
    require_matrix(k, "attention", "keys");
    require_matrix(v, "attention", "values");
    const std::size_t nq = q.dim(0), nk = k.dim(0), D = q.dim(1);
    if (nk == 0) throw EmptyKeysError("attention: empty key set");
    if (k.dim(1) != D) throw ShapeError("attention: key width " + std::to_string(k.dim(1)) +
                                        " differs from query width " + std::to_string(D));
    if (v.dim(0) != nk) throw ShapeError("attention: value rows " + std::to_string(v.dim(0)) +
                                         " differ from key rows " + std::to_string(nk));
    if (v.dim(1) != D) throw ShapeError("attention: value width " + std::to_string(v.dim(1)) +
                                        " differs from query width " + std::to_string(D));
    if (heads == 0 || D % heads != 0)
        throw ShapeError("attention: width " + std::to_string(D) + " not divisible by heads=" + std::to_string(heads));
    if (!allowed.empty() && allowed.size() != nq * nk) throw ShapeError("attention: mask size mismatch");
    const std::size_t dh = D / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    auto Q = q.data();
    auto K = k.data();
    auto V = v.data();
    // probs laid out [head][query][key]
    std::vector<double> probs(heads * nq * nk, 0.0);
    std::vector<double> out(nq * D, 0.0);
    std::vector<double> logits(nk);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * dh;
        for (std::size_t i = 0; i < nq; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < nk; ++j) {
                if (!allowed.empty() && !allowed[i * nk + j]) continue;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += Q[i * D + c0 + c] * K[j * D + c0 + c];
                logits[j] = s * inv_scale;
                mx = std::max(mx, logits[j]);
            }
            if (mx == -std::numeric_limits<double>::infinity())
                throw EmptyKeysError("attention: query " + std::to_string(i) + " has no visible keys");
            double z = 0.0;
            double* pr = &probs[(h * nq + i) * nk];
            for (std::size_t j = 0; j < nk; ++j) {
                if (!allowed.empty() && !allowed[i * nk + j]) continue;
                z += (pr[j] = std::exp(logits[j] - mx));
            }
            for (std::size_t j = 0; j < nk; ++j) pr[j] /= z;
            for (std::size_t j = 0; j < nk; ++j) {
                if (pr[j] == 0.0) continue;
                for (std::size_t c = 0; c < dh; ++c) out[i * D + c0 + c] += pr[j] * V[j * D + c0 + c];
            }
        }
    }
    return make_result({nq, D}, std::move(out), {q, k, v}, "attention",
                       [nq, nk, D, dh, heads, inv_scale, probs = std::move(probs)](Node& self) {
                           const auto& G = self.grad;
                           const auto& Qv = self.parents[0]->value;
                           const auto& Kv = self.parents[1]->value;
                           const auto& Vv = self.parents[2]->value;
                           auto* pq = parent(self, 0);
                           auto* pk = parent(self, 1);
                           auto* pv = parent(self, 2);
                           std::span<double> gQ, gK, gV;
                           if (pq) gQ = pq->ensure_grad();
                           if (pk) gK = pk->ensure_grad();
                           if (pv) gV = pv->ensure_grad();
                           std::vector<double> dl(nk);
                           for (std::size_t h = 0; h < heads; ++h) {
                               const std::size_t c0 = h * dh;
                               for (std::size_t i = 0; i < nq; ++i) {
                                   const double* pr = &probs[(h * nq + i) * nk];
                                   const double* go = &G[i * D + c0];
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < nk; ++j) {
                                       double da = 0.0;
                                       for (std::size_t c = 0; c < dh; ++c) da += go[c] * Vv[j * D + c0 + c];
                                       dl[j] = da;
                                       dot += pr[j] * da;
                                       if (pv && pr[j] != 0.0)
                                           for (std::size_t c = 0; c < dh; ++c) gV[j * D + c0 + c] += pr[j] * go[c];
                                   }
                                   for (std::size_t j = 0; j < nk; ++j) {
                                       const double dlogit = pr[j] * (dl[j] - dot) * inv_scale;
                                       if (dlogit == 0.0) continue;
                                       for (std::size_t c = 0; c < dh; ++c) {
                                           if (pq) gQ[i * D + c0 + c] += dlogit * Kv[j * D + c0 + c];
                                           if (pk) gK[j * D + c0 + c] += dlogit * Qv[i * D + c0 + c];
                                       }
                                   }
                               }
                           }
                       });
}

Tensor focal_bce(const Tensor& scores, const Tensor& labels, double alpha, double gamma) {
    require_same_shape(scores, labels, "focal_bce");
    if (scores.numel() == 0) throw ShapeError("focal_bce: empty score matrix");
    constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
    auto S = scores.data();
    auto Y = labels.data();
    const double n = static_cast<double>(S.size());
    double total = 0.0;
    std::vector<double> dp(S.size(), 0.0);
    for (std::size_t i = 0; i < S.size(); ++i) {
        const bool clamped = S[i] < lo || S[i] > hi;
        const double p = std::clamp(S[i], lo, hi);
        if (Y[i] > 0.5) {
            const double w = std::pow(1.0 - p, gamma);
            total += -alpha * w * std::log(p);
            if (!clamped) {
                const double dw = gamma == 0.0 ? 0.0 : -gamma * std::pow(1.0 - p, gamma - 1.0);
                dp[i] = -alpha * (dw * std::log(p) + w / p);
            }
        } else {
            const double w = std::pow(p, gamma);
            total += -(1.0 - alpha) * w * std::log(1.0 - p);
            if (!clamped) {
                const double dw = gamma == 0.0 ? 0.0 : gamma * std::pow(p, gamma - 1.0);
                dp[i] = -(1.0 - alpha) * (dw * std::log(1.0 - p) - w / (1.0 - p));
            }
        }
    }
    for (auto& d : dp) d /= n;
    return make_result({1}, {total / n}, {scores, labels}, "focal_bce", [dp = std::move(dp)](Node& self) {
        auto* p = parent(self, 0);
        if (!p) return;
        auto g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * dp[i];
    });
}

}  // namespace lain::ops
