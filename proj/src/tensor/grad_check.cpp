#include "lain/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "lain/ops.hpp"

namespace lain {

GradCheckResult grad_check(const std::function<Tensor()>& function,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           const GradCheckOptions& options) {
    if (options.eps < 1e-7 || options.eps > 1e-4) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
    GradCheckResult result;
    std::mt19937_64 rng(options.seed);

    for (const auto& [name, t] : params) {
        auto copy = t;
        copy.zero_grad();
    }

    std::vector<double> weights;
    auto reduce = [&](const Tensor& out) -> double {
        if (out.numel() == 1) return out.item();
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += weights[i] * out.data()[i];
        return s;
    };

    {
        Tensor out = function();
        if (out.numel() != 1) {
            std::uniform_real_distribution<double> dist(-1.0, 1.0);
            weights.resize(out.numel());
            for (auto& w : weights) w = dist(rng);
            ops::weighted_sum(out, weights).backward();
        } else {
            out.backward();
        }
    }

    for (const auto& [name, param] : params) {
        Tensor t = param;
        GradCheckEntry entry{name, 0.0, 0};
        std::vector<double> analytic(t.numel(), 0.0);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

        std::vector<std::size_t> indices(t.numel());
        std::iota(indices.begin(), indices.end(), 0);
        if (options.max_probes_per_tensor > 0 && indices.size() > options.max_probes_per_tensor) {
            std::shuffle(indices.begin(), indices.end(), rng);
            indices.resize(options.max_probes_per_tensor);
            std::sort(indices.begin(), indices.end());
        }

        auto values = t.mutable_data();
        for (auto idx : indices) {
            const double original = values[idx];
            double plus, minus;
            {
                NoGradGuard guard;
                values[idx] = original + options.eps;
                plus = reduce(function());
                values[idx] = original - options.eps;
                minus = reduce(function());
                values[idx] = original;
            }
            const double numeric = (plus - minus) / (2.0 * options.eps);
            if (!std::isfinite(numeric) || !std::isfinite(analytic[idx])) {
                result.finite = false;
                if (result.failure.empty())
                    result.failure = "non-finite value while probing " + name + "[" + std::to_string(idx) + "]";
                continue;
            }
            const double rel = std::abs(analytic[idx] - numeric) / std::max(1.0, std::abs(numeric));
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
            ++entry.probes;
        }
        if (entry.max_rel_error > result.max_rel_error || result.worst_param.empty()) {
            if (entry.max_rel_error >= result.max_rel_error) {
                result.max_rel_error = entry.max_rel_error;
                result.worst_param = name;
            }
        }
        result.entries.push_back(std::move(entry));
    }
    return result;
}

}  // namespace lain
