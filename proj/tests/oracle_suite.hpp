#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "eval_oracle.hpp"
#include "lain/ops.hpp"
#include "oracles.hpp"

namespace oracle {

struct Check {
    std::string name;
    double error = 0.0;
    double tolerance = 0.0;
    bool passed() const { return error <= tolerance; }
};

inline std::vector<double> values(const lain::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline std::vector<Check> run_suite() {
    std::vector<Check> out;
    std::mt19937_64 rng(20240601);
    auto tensor = [&](lain::Shape s, std::vector<double>& keep) {
        keep = random_vector(lain::shape_numel(s), rng);
        return lain::Tensor::from(std::move(s), keep);
    };

    double ev = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto inst = random_instance(seed);
        auto got = lain::average_precision(inst.preds, inst.gt, 0.5);
        auto want = brute_ap(inst.preds, inst.gt, 0.5);
        if (got.has_value() != want.has_value()) ev = INFINITY;
        else if (got) ev = std::max(ev, std::abs(*got - *want));
    }
    out.push_back({"evaluator_vs_bruteforce", ev, 1e-9});

    double band_ev = 0.0;
    for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
        auto inst = random_instance(seed);
        for (auto role : {lain::BoxRole::Human, lain::BoxRole::Object})
            for (const auto& band : lain::default_size_bands()) {
                auto got = lain::average_precision_in_band(inst.preds, inst.gt, 0.5, role, band);
                BandFilter f{band.lo, band.hi, role == lain::BoxRole::Human};
                auto want = brute_ap(inst.preds, inst.gt, 0.5, &f);
                if (got.has_value() != want.has_value()) band_ev = INFINITY;
                else if (got) band_ev = std::max(band_ev, std::abs(*got - *want));
            }
    }
    out.push_back({"size_band_ap_vs_bruteforce", band_ev, 1e-9});

    double roi = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int H = 4 + t % 5, W = 5 + t % 3, C = 3;
        std::vector<double> fm;
        auto map = tensor({static_cast<std::size_t>(H), static_cast<std::size_t>(W), 3}, fm);
        std::uniform_real_distribution<double> u(0.0, 0.45), w(0.05, 0.5);
        const double x1 = u(rng), y1 = u(rng), x2 = x1 + w(rng), y2 = y1 + w(rng);
        auto got = lain::ops::roi_align(map, {x1, y1, x2, y2}, 3, 2);
        roi = std::max(roi, max_abs_diff(values(got), roi_align(fm, H, W, C, x1, y1, x2, y2, 3, 2)));
    }
    out.push_back({"roi_align_vs_bilinear", roi, 1e-9});

    {
        std::vector<double> in, ker;
        auto a = tensor({6, 5, 3}, in);
        auto k = tensor({3, 3, 3, 4}, ker);
        out.push_back({"conv2d_vs_loops", max_abs_diff(values(lain::ops::conv2d(a, k)), conv2d(in, 6, 5, 3, ker, 3, 4)),
                       1e-9});
    }
    {
        std::vector<double> x, g, b;
        auto tx = tensor({4, 7}, x), tg = tensor({7}, g), tb = tensor({7}, b);
        out.push_back({"layer_norm_vs_loops",
                       max_abs_diff(values(lain::ops::layer_norm(tx, tg, tb, 1e-6)), layer_norm(x, g, b, 1e-6)), 1e-9});
    }
    {
        std::vector<double> q, k, v;
        auto tq = tensor({3, 8}, q), tk = tensor({5, 8}, k), tv = tensor({5, 8}, v);
        out.push_back({"attention_vs_loops",
                       max_abs_diff(values(lain::ops::attention(tq, tk, tv, 2)), attention(q, k, v, 3, 5, 8, 2)),
                       1e-9});
    }

    out.push_back({"iou_one_seventh", std::abs(lain::iou({0, 0, 2, 2}, {1, 1, 3, 3}) - 1.0 / 7.0), 1e-15});
    {
        auto s = lain::Tensor::from({1, 1}, {0.5});
        auto y = lain::Tensor::from({1, 1}, {1.0});
        const double want = 0.25 * 0.25 * std::log(2.0);
        out.push_back({"focal_closed_form", std::abs(lain::ops::focal_bce(s, y, 0.25, 2.0).item() - want), 1e-15});
    }
    return out;
}

}  // namespace oracle
