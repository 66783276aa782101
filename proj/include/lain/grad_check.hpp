#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lain/tensor.hpp"

namespace lain {

struct GradCheckOptions {
    double eps = 1e-5;
    std::uint64_t seed = 1234;
    // Entries probed per tensor; 0 probes every entry. Probed indices are a
    // seeded sample so runs are reproducible.
    std::size_t max_probes_per_tensor = 0;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t probes = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    bool finite = true;
    std::string failure;  // names the parameter when probing produced a non-finite value
    std::vector<GradCheckEntry> entries;

    bool passed(double tolerance) const { return finite && max_rel_error <= tolerance; }
};

// Compares reverse-mode gradients with central differences. A tensor-valued
// `function` is reduced to a scalar with a fixed random linear functional; a
// one-element output is used as is. Relative error per entry is
// |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(const std::function<Tensor()>& function,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           const GradCheckOptions& options = {});

}  // namespace lain
