#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lain/tensor.hpp"

namespace lain {

// Named parameters keyed by dotted path. Iteration is lexicographic by name.
// Frozen entries have requires_grad == false and never hold a gradient.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor value, bool trainable);
    // Gaussian init with the given standard deviation (0 gives zeros).
    Tensor add_normal(const std::string& name, Shape shape, double stddev, bool trainable, std::mt19937_64& rng);
    Tensor add_constant(const std::string& name, Shape shape, double value, bool trainable);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, Tensor>& entries() const { return entries_; }

    std::vector<std::pair<std::string, Tensor>> trainable() const;
    std::vector<std::pair<std::string, Tensor>> frozen() const;
    // Trainable entries whose name starts with `prefix`.
    std::vector<std::pair<std::string, Tensor>> trainable_with_prefix(const std::string& prefix) const;
    std::size_t trainable_count() const;

    void zero_grad();
    // Freezes (or unfreezes) every entry under `prefix`.
    void set_trainable(const std::string& prefix, bool trainable);

    // FNV-1a over names, shapes and value bits.
    std::uint64_t checksum(bool frozen_only = false) const;

    // Deep copy with independent storage.
    ParamStore clone() const;
    // Copies values from `other`; names and shapes must match.
    void copy_values_from(const ParamStore& other);

private:
    std::map<std::string, Tensor> entries_;
};

}  // namespace lain
