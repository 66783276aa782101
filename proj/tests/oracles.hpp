#pragma once

// Straight-line reference implementations used only by tests. They share no
// code with src/ so that agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

// out[i][j][o] = sum over the zero-padded k x k window.
inline std::vector<double> conv2d(const std::vector<double>& in, int H, int W, int C, const std::vector<double>& ker,
                                  int k, int O) {
    std::vector<double> out(static_cast<std::size_t>(H * W * O), 0.0);
    const int p = k / 2;
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            for (int o = 0; o < O; ++o) {
                double s = 0.0;
                for (int a = 0; a < k; ++a)
                    for (int b = 0; b < k; ++b) {
                        int y = i + a - p, x = j + b - p;
                        if (y < 0 || y >= H || x < 0 || x >= W) continue;
                        for (int c = 0; c < C; ++c)
                            s += in[(y * W + x) * C + c] * ker[((a * k + b) * C + c) * O + o];
                    }
                out[(i * W + j) * O + o] = s;
            }
    return out;
}

inline std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<double>& g,
                                      const std::vector<double>& b, double eps) {
    const std::size_t d = g.size();
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r * d < x.size(); ++r) {
        double mu = 0, sq = 0;
        for (std::size_t j = 0; j < d; ++j) mu += x[r * d + j];
        mu /= d;
        for (std::size_t j = 0; j < d; ++j) sq += std::pow(x[r * d + j] - mu, 2);
        double sd = std::sqrt(sq / d + eps);
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = g[j] * (x[r * d + j] - mu) / sd + b[j];
    }
    return out;
}

// Attention without projections, one head at a time, explicit softmax.
inline std::vector<double> attention(const std::vector<double>& q, const std::vector<double>& k,
                                     const std::vector<double>& v, int nq, int nk, int D, int heads) {
    const int dh = D / heads;
    std::vector<double> out(static_cast<std::size_t>(nq * D), 0.0);
    for (int h = 0; h < heads; ++h)
        for (int i = 0; i < nq; ++i) {
            std::vector<double> e(nk);
            double z = 0;
            for (int j = 0; j < nk; ++j) {
                double s = 0;
                for (int c = 0; c < dh; ++c) s += q[i * D + h * dh + c] * k[j * D + h * dh + c];
                e[j] = std::exp(s / std::sqrt(static_cast<double>(dh)));
                z += e[j];
            }
            for (int j = 0; j < nk; ++j)
                for (int c = 0; c < dh; ++c) out[i * D + h * dh + c] += e[j] / z * v[j * D + h * dh + c];
        }
    return out;
}

// Bilinear read at continuous pixel-index coordinates (pixel centres at integers).
inline double bilinear(const std::vector<double>& fm, int H, int W, int C, int c, double y, double x) {
    y = std::min(std::max(y, 0.0), H - 1.0);
    x = std::min(std::max(x, 0.0), W - 1.0);
    int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
    int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    double wy = y - y0, wx = x - x0;
    auto at = [&](int yy, int xx) { return fm[(yy * W + xx) * C + c]; };
    return at(y0, x0) * (1 - wy) * (1 - wx) + at(y0, x1) * (1 - wy) * wx + at(y1, x0) * wy * (1 - wx) +
           at(y1, x1) * wy * wx;
}

inline std::vector<double> roi_align(const std::vector<double>& fm, int H, int W, int C, double x1, double y1,
                                     double x2, double y2, int s, int n) {
    std::vector<double> out(static_cast<std::size_t>(s * s * C), 0.0);
    for (int by = 0; by < s; ++by)
        for (int bx = 0; bx < s; ++bx)
            for (int c = 0; c < C; ++c) {
                double acc = 0;
                for (int iy = 0; iy < n; ++iy)
                    for (int ix = 0; ix < n; ++ix) {
                        // normalized sample position, then pixel-index coordinates
                        double ny = y1 + (y2 - y1) * (by + (iy + 0.5) / n) / s;
                        double nx = x1 + (x2 - x1) * (bx + (ix + 0.5) / n) / s;
                        acc += bilinear(fm, H, W, C, c, ny * H - 0.5, nx * W - 0.5);
                    }
                out[(by * s + bx) * C + c] = acc / (n * n);
            }
    return out;
}

inline std::vector<double> linear(const std::vector<double>& x, std::size_t in, const std::vector<double>& w,
                                  const std::vector<double>& b) {
    const std::size_t out = b.size(), n = x.size() / in;
    std::vector<double> y(n * out);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < out; ++o) {
            double s = b[o];
            for (std::size_t i = 0; i < in; ++i) s += x[r * in + i] * w[i * out + o];
            y[r * out + o] = s;
        }
    return y;
}

inline std::vector<double> gelu(std::vector<double> x) {
    for (auto& v : x) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    return x;
}

inline std::vector<double> sigmoid(std::vector<double> x) {
    for (auto& v : x) v = 1.0 / (1.0 + std::exp(-v));
    return x;
}

inline std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
